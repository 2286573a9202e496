use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sysid_core::{LinearSystem, Matrix};

/// Least-squares identification of linear dynamical systems from a single
/// trajectory: simulation, estimation, finite-sample bounds and Monte Carlo
/// verifiers.
#[derive(Debug, Parser)]
#[command(name = "sysid", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write it as CSV
    Simulate(SimulateArgs),
    /// Fit A (and B) by least squares from a simulated or recorded trajectory
    Estimate(EstimateArgs),
    /// Controllability Gramians, their spectra and the selected block length
    Gramian(GramianArgs),
    /// Upper bounds on the estimation error or on the required horizon
    Bound {
        #[command(subcommand)]
        which: BoundCommand,
    },
    /// Minimax lower bounds on the horizon
    LowerBound {
        #[command(subcommand)]
        which: LowerBoundCommand,
    },
    /// Config-driven Monte Carlo sweep over a horizon grid
    Sweep(SweepArgs),
    /// Monte Carlo and exact checks of the concentration ingredients
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
    /// Empirical error quantiles of scalar systems across the three regimes
    RegimeReport(RegimeArgs),
}

/// Seed and universal constants, echoed into every artifact.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct Common {
    /// Seed for every random draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Universal constant c in burn-in conditions and regime boundaries
    #[arg(long = "c", default_value_t = 1.0, value_parser = positive)]
    pub c: f64,
    /// Universal constant c0 in the orthogonal lower bound
    #[arg(long = "c0", default_value_t = 1.0, value_parser = positive)]
    pub c0: f64,
    /// Universal constant C in rate bounds
    #[arg(long = "C", value_name = "C", default_value_t = 1.0, value_parser = positive)]
    pub big_c: f64,
    /// Small-ball probability p
    #[arg(long = "p", default_value_t = 0.15, value_parser = probability)]
    pub p: f64,
}

impl Common {
    pub fn constants(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([("c", self.c), ("c0", self.c0), ("C", self.big_c), ("p", self.p)])
    }
}

/// Dynamics `X_{t+1} = AX_t + Bu_t + η_t`.
#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Scalar dynamics a (a 1x1 system)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "a_matrix")]
    pub scalar_a: Option<f64>,
    /// Dynamics matrix A, rows separated by ';' and entries by ','
    #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
    pub a_matrix: Option<Matrix>,
    /// Input matrix B; enables white-noise inputs u_t ~ N(0, sigma_u² I)
    #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
    pub b_matrix: Option<Matrix>,
    /// Process-noise standard deviation sigma
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub sigma: f64,
    /// Input standard deviation sigma_u (used with --b-matrix)
    #[arg(long, default_value_t = 1.0, value_parser = nonnegative)]
    pub sigma_u: f64,
}

impl SystemArgs {
    pub fn is_given(&self) -> bool {
        self.scalar_a.is_some() || self.a_matrix.is_some()
    }

    pub fn build(&self) -> anyhow::Result<LinearSystem> {
        let a = match (&self.scalar_a, &self.a_matrix) {
            (Some(a), None) => Matrix::scalar(*a),
            (None, Some(m)) => m.clone(),
            _ => anyhow::bail!("one of --scalar-a or --a-matrix is required"),
        };
        let sys = LinearSystem::new(a, self.sigma * self.sigma).map_err(|e| anyhow::anyhow!("--a-matrix: {e}"))?;
        match &self.b_matrix {
            Some(b) => sys
                .with_input(b.clone(), self.sigma_u * self.sigma_u)
                .map_err(|e| anyhow::anyhow!("--b-matrix: {e}")),
            None => Ok(sys),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Number of transitions T (the CSV holds X_0..X_T)
    #[arg(long = "T", value_name = "T", default_value_t = 100, value_parser = horizon)]
    pub horizon: usize,
    /// Initial state, comma separated (default zero)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Trajectory CSV to fit instead of simulating (as written by `simulate`)
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Horizon T of the simulated trajectory
    #[arg(long = "T", value_name = "T", default_value_t = 1000, value_parser = horizon)]
    pub horizon: usize,
    /// Output JSON path for the estimate report
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GramianArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 100, value_parser = horizon)]
    pub horizon: usize,
    /// Failure probability delta for block-length selection
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Trials for the growth diagnostic (0 skips it)
    #[arg(long, default_value_t = 200)]
    pub growth_trials: usize,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum BoundCommand {
    /// Explicit-constant error bound from the LDS small-ball certificate
    Main(BoundMainArgs),
    /// Horizon sufficient for |â − a| ≤ eps with probability 1 − delta
    Scalar(ScalarBoundArgs),
    /// Error bound for systems driven by white-noise inputs
    Input(BoundInputArgs),
    /// Failure probability from the capped moment-generating recursion
    MgfProb(MgfProbArgs),
    /// Log-determinant bound for diagonalizable systems
    DiagLogdet(DiagLogdetArgs),
    /// Rate for diagonalizable systems in terms of the least excitable mode
    DiagRate(DiagRateArgs),
}

#[derive(Debug, Args)]
pub struct BoundMainArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 100_000, value_parser = horizon)]
    pub horizon: usize,
    /// Failure probability delta (the bound holds with probability 1 − 3 delta)
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Output dimension n (default: state dimension)
    #[arg(long)]
    pub n: Option<usize>,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScalarBoundArgs {
    /// Scalar dynamics a
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Target accuracy eps
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub eps: f64,
    /// Failure probability delta
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BoundInputArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 10_000, value_parser = horizon)]
    pub horizon: usize,
    /// Block length k (default: the largest k meeting the burn-in condition)
    #[arg(long)]
    pub k: Option<usize>,
    /// Failure probability delta
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MgfProbArgs {
    /// Scalar dynamics a
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Target accuracy eps
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub eps: f64,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 1000, value_parser = horizon)]
    pub horizon: usize,
    /// Tilt alpha (default 2 eps)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DiagLogdetArgs {
    /// Condition number of the eigenvector matrix S
    #[arg(long, default_value_t = 1.0)]
    pub cond_s: f64,
    /// State dimension d
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 1000, value_parser = horizon)]
    pub horizon: usize,
    /// Block length k
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Jordan block sizes, comma separated (default: d blocks of size 1)
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DiagRateArgs {
    /// Condition number of the eigenvector matrix S
    #[arg(long, default_value_t = 1.0)]
    pub cond_s: f64,
    /// State dimension d
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 1000, value_parser = horizon)]
    pub horizon: usize,
    /// Failure probability delta
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Smallest eigenvalue magnitude of A
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub underline_rho: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum LowerBoundCommand {
    /// Horizon below which no estimator reaches eps for the scalar system
    Scalar(ScalarBoundArgs),
    /// Horizon below which no estimator reaches eps over scaled orthogonal systems
    Orthogonal(OrthogonalLowerArgs),
    /// Mutual-information threshold for N + 1 hypotheses
    Birge(BirgeArgs),
}

#[derive(Debug, Args)]
pub struct OrthogonalLowerArgs {
    /// Scale rho of the orthogonal family
    #[arg(long, default_value_t = 0.9, value_parser = positive)]
    pub rho: f64,
    /// State dimension d
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Target accuracy eps
    #[arg(long, default_value_t = 1e-4, value_parser = positive)]
    pub eps: f64,
    /// Failure probability delta
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BirgeArgs {
    /// Number of alternatives N
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Failure probability delta
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for sweep.csv and manifest.json
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: machine parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Block small-ball condition of an LDS: exact Gaussian values and Monte Carlo
    Bmsb(BmsbArgs),
    /// Small-ball tail bound on a scalar system
    Smallball(SmallballArgs),
    /// Self-normalized martingale tail bound on a scalar system
    Martingale(MartingaleArgs),
    /// Closed-form one-step MGF against quadrature
    Mgf(MgfArgs),
    /// Trajectory KL divergence: closed form against Monte Carlo
    Kl(KlArgs),
    /// Build and certify an orthogonal packing
    Packing(PackingArgs),
}

#[derive(Debug, Args)]
pub struct BmsbArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Block length k
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Number of anchor states (the first is zero)
    #[arg(long, default_value_t = 3)]
    pub anchors: usize,
    /// Standard deviation of the random anchors
    #[arg(long, default_value_t = 3.0, value_parser = nonnegative)]
    pub anchor_scale: f64,
    /// Number of random unit directions
    #[arg(long, default_value_t = 3)]
    pub directions: usize,
    /// Monte Carlo continuations per anchor
    #[arg(long, default_value_t = 4000)]
    pub trials: usize,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SmallballArgs {
    /// Scalar dynamics a
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub a: f64,
    /// Noise standard deviation sigma
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub sigma: f64,
    /// Block length k
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Small-ball scale nu (default sigma·√γ_{k′}(a), k′ = max(1, ⌊k/2⌋))
    #[arg(long)]
    pub nu: Option<f64>,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 100, value_parser = horizon)]
    pub horizon: usize,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Run the default grid instead of a single point
    #[arg(long)]
    pub grid: bool,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MartingaleArgs {
    /// Scalar dynamics a
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    /// Noise standard deviation sigma
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub sigma: f64,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 50, value_parser = horizon)]
    pub horizon: usize,
    /// Level beta on Σ Z_t² (default sigma²·T·γ_T(a))
    #[arg(long)]
    pub beta: Option<f64>,
    /// Threshold alpha on Σ Z_t W_t (default sigma·√(2 beta log 10))
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Run the default grid instead of a single point
    #[arg(long)]
    pub grid: bool,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MgfArgs {
    /// Number of random (a, nu, mu, x) tuples with |nu| ≤ 0.8
    #[arg(long, default_value_t = 100)]
    pub tuples: usize,
    /// Single tuple a,nu,mu,x instead of random ones
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub point: Option<Vec<f64>>,
    /// Largest accepted relative difference
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub tol: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Scale rho of the reference system rho·O
    #[arg(long, default_value_t = 0.9, value_parser = nonnegative)]
    pub rho: f64,
    /// State dimension d
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 10, value_parser = horizon)]
    pub horizon: usize,
    /// Scale of the Gaussian perturbation A − rho·O
    #[arg(long, default_value_t = 0.05, value_parser = nonnegative)]
    pub perturb: f64,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Output JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PackingArgs {
    /// State dimension d
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Packing scale epsilon0 (at most 1/256)
    #[arg(long, default_value_t = 1.0 / 300.0, value_parser = positive)]
    pub eps0: f64,
    /// Output JSON path (default: print to stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    /// Scalar dynamics to tabulate, comma separated, within [0, 1.5]
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.9,0.99,0.999,1,1.001,1.01,1.05,1.1")]
    pub a_grid: Vec<f64>,
    /// Horizon T
    #[arg(long = "T", value_name = "T", default_value_t = 1000, value_parser = horizon)]
    pub horizon: usize,
    /// Trials per value of a
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    /// Quantile level delta (the 1 − delta quantile is reported)
    #[arg(long, default_value_t = 0.1, value_parser = probability_open)]
    pub delta: f64,
    /// Worker threads (default: machine parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("'{s}' is not a number: {e}"))
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be nonnegative and finite, got {v}"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn probability_open(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

fn horizon(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        Ok(_) => Err("must be at least 1".into()),
        Err(e) => Err(format!("'{s}' is not a positive integer: {e}")),
    }
}

/// Parses `"a,b;c,d"` into a matrix (entries may also be separated by spaces).
pub fn parse_matrix(s: &str) -> Result<Matrix, String> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(number)
                .collect::<Result<Vec<f64>, String>>()
        })
        .collect::<Result<_, _>>()?;
    Matrix::from_rows(&rows).map_err(|e| e.to_string())
}
