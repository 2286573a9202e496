//! Linear dynamical systems, simulation, controllability Gramians and
//! block-length selection.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{operator_norm, random_gaussian_matrix, sym_eigen, Matrix, RngStream};

/// Coordinates beyond this magnitude mark a trajectory as overflowed.
pub const OVERFLOW_LIMIT: f64 = 1e150;

/// `X_{t+1} = A X_t + B u_t + η_t` with `η_t ~ N(0, σ²I)` and
/// `u_t ~ N(0, σ_u²I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Option<Matrix>,
    pub sigma2: f64,
    pub input_sigma2: Option<f64>,
}

impl LinearSystem {
    pub fn new(a: Matrix, sigma2: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self {
            a,
            b: None,
            sigma2,
            input_sigma2: None,
        })
    }

    /// Scalar system `x_{t+1} = a x_t + η_t`, `η_t ~ N(0, σ²)`.
    pub fn scalar(a: f64, sigma: f64) -> Result<Self> {
        Self::new(Matrix::new(1, 1, vec![a])?, sigma * sigma)
    }

    pub fn with_input(mut self, b: Matrix, input_sigma2: f64) -> Result<Self> {
        if b.rows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, state dimension is {}",
                b.rows(),
                self.dim()
            )));
        }
        if !(input_sigma2 >= 0.0 && input_sigma2.is_finite()) {
            return Err(invalid(format!(
                "input variance must be nonnegative, got {input_sigma2}"
            )));
        }
        self.b = Some(b);
        self.input_sigma2 = Some(input_sigma2);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.as_ref().map_or(0, Matrix::cols)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `[A B]`, or `A` without inputs.
    pub fn stacked_parameters(&self) -> Matrix {
        match &self.b {
            Some(b) => self.a.hstack(b).expect("B rows checked at construction"),
            None => self.a.clone(),
        }
    }
}

/// States `X_0..X_T` stored row-major, one row of length `d` per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub states: Vec<f64>,
    pub input_dim: usize,
    /// `u_0..u_{T-1}` when the system has inputs.
    pub inputs: Option<Vec<f64>>,
    /// Generator state at the start of the simulation.
    pub seed: RngStream,
    pub overflowed: bool,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.dim..(t + 1) * self.dim]
    }

    pub fn input(&self, t: usize) -> Option<&[f64]> {
        self.inputs
            .as_ref()
            .map(|u| &u[t * self.input_dim..(t + 1) * self.input_dim])
    }

    /// CSV with header `t,x_0,...,x_{d-1}`, one row per time step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for t in 0..=self.horizon() {
            write!(w, "{t}")?;
            for v in self.state(t) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Simulates `T` steps from `x0` (default zero). The generator is advanced.
pub fn simulate(
    sys: &LinearSystem,
    horizon: usize,
    rng: &mut RngStream,
    x0: Option<&[f64]>,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(invalid("horizon must be at least 1"));
    }
    let d = sys.dim();
    let m = sys.input_dim();
    let seed = rng.clone();
    let mut states = vec![0.0; (horizon + 1) * d];
    if let Some(x0) = x0 {
        if x0.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "x0 has length {}, state dimension is {d}",
                x0.len()
            )));
        }
        states[..d].copy_from_slice(x0);
    }
    let sigma = sys.sigma();
    let sigma_u = sys.input_sigma2.unwrap_or(0.0).sqrt();
    let mut inputs = sys.b.as_ref().map(|_| vec![0.0; horizon * m]);
    let a = sys.a.as_slice();
    let mut overflowed = states[..d].iter().any(|v| v.abs() > OVERFLOW_LIMIT);
    let mut u = vec![0.0; m];

    for t in 0..horizon {
        let (prev, next) = states.split_at_mut((t + 1) * d);
        let x = &prev[t * d..];
        let next = &mut next[..d];
        for (i, out) in next.iter_mut().enumerate() {
            let row = &a[i * d..(i + 1) * d];
            *out = row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + sigma * rng.next_gaussian();
        }
        if let (Some(b), Some(inputs)) = (&sys.b, inputs.as_mut()) {
            rng.fill_gaussian(&mut u, sigma_u);
            for (i, out) in next.iter_mut().enumerate() {
                *out += b.row(i).iter().zip(&u).map(|(p, q)| p * q).sum::<f64>();
            }
            inputs[t * m..(t + 1) * m].copy_from_slice(&u);
        }
        if !overflowed && next.iter().any(|v| !(v.abs() <= OVERFLOW_LIMIT)) {
            overflowed = true;
        }
    }

    Ok(Trajectory {
        dim: d,
        states,
        input_dim: m,
        inputs,
        seed,
        overflowed,
    })
}

/// `Γ_1..Γ_T` with cached spectral summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramianSeries {
    /// `gramians[t-1] = Γ_t`.
    pub gramians: Vec<Matrix>,
    /// `control_gramians[t-1] = Γ^B_t` when the system has inputs.
    pub control_gramians: Option<Vec<Matrix>>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub trace: Vec<f64>,
    pub log_det: Vec<f64>,
}

impl GramianSeries {
    pub fn horizon(&self) -> usize {
        self.gramians.len()
    }

    pub fn dim(&self) -> usize {
        self.gramians[0].rows()
    }

    /// `Γ_t`, 1-indexed.
    pub fn gamma(&self, t: usize) -> &Matrix {
        &self.gramians[t - 1]
    }

    /// `Γ^B_t`, 1-indexed.
    pub fn control_gamma(&self, t: usize) -> Option<&Matrix> {
        self.control_gramians.as_ref().map(|g| &g[t - 1])
    }

    /// `log det(Γ_T Γ_k^{-1})` from the cached log-determinants.
    pub fn log_det_ratio(&self, k: usize) -> f64 {
        self.log_det[self.horizon() - 1] - self.log_det[k - 1]
    }
}

/// Gramians by `Γ_1 = I`, `Γ_{t+1} = I + AΓ_tAᵀ` and, with inputs,
/// `Γ^B_1 = BBᵀ`, `Γ^B_{t+1} = BBᵀ + AΓ^B_tAᵀ`.
pub fn gramian_series(sys: &LinearSystem, horizon: usize) -> Result<GramianSeries> {
    if horizon < 1 {
        return Err(invalid("horizon must be at least 1"));
    }
    let d = sys.dim();
    let a = &sys.a;
    let at = a.transpose();
    let id = Matrix::identity(d);
    let step = |g: &Matrix, base: &Matrix| (base + &a.matmul(g).matmul(&at)).symmetrize();

    let mut gramians = Vec::with_capacity(horizon);
    gramians.push(id.clone());
    for t in 1..horizon {
        let next = step(&gramians[t - 1], &id);
        if !next.is_finite() {
            return Err(invalid(format!("Gramian overflowed at t = {}", t + 1)));
        }
        gramians.push(next);
    }

    let control_gramians = match &sys.b {
        Some(b) => {
            let bbt = b.matmul(&b.transpose());
            let mut cg = Vec::with_capacity(horizon);
            cg.push(bbt.clone());
            for t in 1..horizon {
                let next = step(&cg[t - 1], &bbt);
                if !next.is_finite() {
                    return Err(invalid(format!("control Gramian overflowed at t = {}", t + 1)));
                }
                cg.push(next);
            }
            Some(cg)
        }
        None => None,
    };

    let mut lambda_min = Vec::with_capacity(horizon);
    let mut lambda_max = Vec::with_capacity(horizon);
    let mut trace = Vec::with_capacity(horizon);
    let mut log_det = Vec::with_capacity(horizon);
    for g in &gramians {
        let eig = sym_eigen(g)?;
        lambda_min.push(eig.min());
        lambda_max.push(eig.max());
        trace.push(g.trace());
        log_det.push(eig.eigenvalues.iter().map(|l| l.ln()).sum());
    }

    Ok(GramianSeries {
        gramians,
        control_gramians,
        lambda_min,
        lambda_max,
        trace,
        log_det,
    })
}

/// `γ_t(ρ) = Σ_{s=0}^{t-1} |ρ|^{2s}` with `0⁰ = 1`.
pub fn scalar_gramian(rho: f64, t: usize) -> f64 {
    assert!(t >= 1, "scalar_gramian needs t >= 1");
    let r = rho.abs();
    if r == 1.0 {
        t as f64
    } else if r == 0.0 {
        1.0
    } else {
        let l = 2.0 * r.ln();
        (l * t as f64).exp_m1() / l.exp_m1()
    }
}

/// Both sides of `T/k ≥ c(d log(d/δ) + log det(Γ_T Γ_k^{-1}))`.
pub fn block_length_condition(
    gs: &GramianSeries,
    k: usize,
    d: usize,
    delta: f64,
    c: f64,
) -> (f64, f64) {
    let t = gs.horizon() as f64;
    let df = d as f64;
    (
        t / k as f64,
        c * (df * (df / delta).ln() + gs.log_det_ratio(k)),
    )
}

/// Largest `k ∈ [1, T]` satisfying the burn-in condition.
///
/// Both sides decrease in `k`, so the scan runs downward from `T` and stops
/// at the first feasible value.
pub fn select_block_length(gs: &GramianSeries, d: usize, delta: f64, c: f64) -> Result<usize> {
    check_delta(delta)?;
    if !(c > 0.0) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    let horizon = gs.horizon();
    (1..=horizon)
        .rev()
        .find(|&k| {
            let (lhs, rhs) = block_length_condition(gs, k, d, delta, c);
            lhs >= rhs
        })
        .ok_or(Error::NoFeasibleK { horizon })
}

/// `k = ⌊T / (c d log(cond(S) d/δ))⌋` for diagonalizable `A = S D S⁻¹`.
pub fn diag_block_length(cond_s: f64, d: usize, delta: f64, horizon: usize, c: f64) -> Result<usize> {
    if !(cond_s >= 1.0) {
        return Err(invalid(format!("cond(S) must be at least 1, got {cond_s}")));
    }
    if !(delta > 0.0 && delta < 1.0) || !(c > 0.0) {
        return Err(invalid("need delta in (0, 1) and c > 0"));
    }
    let denom = c * d as f64 * (cond_s * d as f64 / delta).ln();
    let k = (horizon as f64 / denom).floor();
    if k < 1.0 {
        return Err(Error::NoFeasibleK { horizon });
    }
    Ok((k as usize).min(horizon))
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")))
    }
}

/// Random `d×d` matrix rescaled to operator norm uniform in `[0.5, 1]`, hence
/// spectral radius at most 1.
pub fn random_marginally_stable(rng: &mut RngStream, d: usize) -> Matrix {
    let g = random_gaussian_matrix(rng, d, d);
    let target = 0.5 + 0.5 * rng.next_f64();
    g.scale(target / operator_norm(&g))
}

/// Monte Carlo growth exponent of `E‖X_t‖²` between `T/2` and `T`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthDiagnostic {
    pub exponent: f64,
    /// Growth faster than `t^{2d}` signals an unstable system.
    pub superlinear: bool,
}

/// Estimates `log₂(E‖X_T‖² / E‖X_{T/2}‖²)` from `trials` runs.
pub fn growth_diagnostic(
    sys: &LinearSystem,
    horizon: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<GrowthDiagnostic> {
    if horizon < 2 || trials == 0 {
        return Err(invalid("growth diagnostic needs T >= 2 and trials >= 1"));
    }
    let half = horizon / 2;
    let (mut m_half, mut m_full) = (0.0, 0.0);
    for i in 0..trials {
        let mut r = rng.substream(i as u64);
        let traj = simulate(sys, horizon, &mut r, None)?;
        if traj.overflowed {
            return Ok(GrowthDiagnostic {
                exponent: f64::INFINITY,
                superlinear: true,
            });
        }
        m_half += traj.state(half).iter().map(|v| v * v).sum::<f64>();
        m_full += traj.state(horizon).iter().map(|v| v * v).sum::<f64>();
    }
    let exponent = (m_full / m_half).ln() / (horizon as f64 / half as f64).ln();
    Ok(GrowthDiagnostic {
        exponent,
        superlinear: exponent > 2.0 * sys.dim() as f64,
    })
}
