//! Packings of the orthogonal group built through the exponential map, and
//! KL divergences between trajectory laws (unit noise throughout).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lds::scalar_gramian;
use crate::numerics::{matrix_exp, operator_norm, uniform_in_ball, Matrix, RngStream};

/// Largest admissible packing scale.
pub const MAX_EPSILON0: f64 = 1.0 / 256.0;

const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Points of the unit ball, pairwise at least `1/2` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPacking {
    pub points: Vec<Vec<f64>>,
    pub min_separation: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Greedy rejection sampling of a `1/2`-packing of the unit ball in
/// `R^{d_minus_1}` with `target_count` points.
pub fn ball_packing(d_minus_1: usize, target_count: usize, rng: &mut RngStream) -> Result<BallPacking> {
    if d_minus_1 == 0 || target_count < 2 {
        return Err(invalid("need dimension >= 1 and target_count >= 2"));
    }
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(target_count);
    let mut rejections = 0;
    while points.len() < target_count {
        let w = uniform_in_ball(rng, d_minus_1);
        if points.iter().all(|p| dist(p, &w) >= 0.5) {
            points.push(w);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::PackingStalled {
                    consecutive_rejections: rejections,
                    found: points.len(),
                    target: target_count,
                });
            }
        }
    }
    let mut min_separation = f64::INFINITY;
    for i in 0..points.len() {
        for j in 0..i {
            min_separation = min_separation.min(dist(&points[i], &points[j]));
        }
    }
    Ok(BallPacking {
        points,
        min_separation,
    })
}

/// `M(w) = ε₀(e₁(0,w)ᵀ − (0,w)e₁ᵀ)`, a skew matrix with operator norm
/// `ε₀‖w‖`.
pub fn skew_lift(w: &[f64], epsilon0: f64) -> Matrix {
    let d = w.len() + 1;
    let mut m = Matrix::zeros(d, d);
    for (j, &wj) in w.iter().enumerate() {
        m[(0, j + 1)] = epsilon0 * wj;
        m[(j + 1, 0)] = -epsilon0 * wj;
    }
    m
}

/// Orthogonal matrices `exp(M(w))` over a ball packing, with certified
/// extremes over all pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSet {
    pub epsilon0: f64,
    pub members: Vec<Matrix>,
    pub min_op_separation: f64,
    pub max_fro_diameter: f64,
    pub max_orthogonality_residual: f64,
    pub seed: RngStream,
}

/// Builds and exhaustively certifies the packing: pairwise operator-norm
/// distance at least `ε₀/4`, Frobenius distance at most `4ε₀`.
pub fn build_packing(d: usize, epsilon0: f64, rng: &mut RngStream) -> Result<PackingSet> {
    if d < 2 {
        return Err(invalid(format!("need d >= 2, got {d}")));
    }
    if !(epsilon0 > 0.0) {
        return Err(invalid(format!("epsilon0 must be positive, got {epsilon0}")));
    }
    if epsilon0 > MAX_EPSILON0 {
        return Err(Error::Epsilon0TooLarge { epsilon0 });
    }
    let seed = rng.clone();
    let target = 1usize << (d - 1).min(20);
    let balls = ball_packing(d - 1, target.max(2), rng)?;
    let members: Vec<Matrix> = balls
        .points
        .iter()
        .map(|w| matrix_exp(&skew_lift(w, epsilon0)))
        .collect();

    let max_orthogonality_residual = members
        .iter()
        .map(Matrix::orthogonality_residual)
        .fold(0.0, f64::max);
    if max_orthogonality_residual > ORTHOGONALITY_TOL {
        return Err(Error::SeparationViolated(format!(
            "member orthogonality residual {max_orthogonality_residual:.3e}"
        )));
    }

    let pairs: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .collect();
    let (min_op, max_fro) = pairs
        .par_iter()
        .map(|&(i, j)| {
            let diff = &members[i] - &members[j];
            (operator_norm(&diff), diff.frobenius_norm())
        })
        .reduce(
            || (f64::INFINITY, 0.0),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    if min_op < epsilon0 / 4.0 - 1e-10 {
        return Err(Error::SeparationViolated(format!(
            "operator-norm separation {min_op:.6e} below epsilon0/4 = {:.6e}",
            epsilon0 / 4.0
        )));
    }
    if max_fro > 4.0 * epsilon0 + 1e-10 {
        return Err(Error::SeparationViolated(format!(
            "Frobenius diameter {max_fro:.6e} above 4 epsilon0 = {:.6e}",
            4.0 * epsilon0
        )));
    }
    Ok(PackingSet {
        epsilon0,
        members,
        min_op_separation: min_op,
        max_fro_diameter: max_fro,
        max_orthogonality_residual,
        seed,
    })
}

fn check_orthogonal(o: &Matrix) -> Result<()> {
    if !o.is_square() {
        return Err(Error::DimensionMismatch("O must be square".into()));
    }
    let residual = o.orthogonality_residual();
    if residual > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { residual });
    }
    Ok(())
}

/// `‖ρO − A‖²_F Σ_{t=1}^T γ_t(ρ)`.
///
/// This is twice the KL divergence between the trajectory laws under `ρO`
/// and `A`; [`kl_monte_carlo`] reports both scalings.
pub fn trajectory_kl(rho: f64, o: &Matrix, a: &Matrix, horizon: usize) -> Result<f64> {
    check_orthogonal(o)?;
    if o.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "O is {:?}, A is {:?}",
            o.shape(),
            a.shape()
        )));
    }
    let gap = (&o.scale(rho) - a).frobenius_norm().powi(2);
    let gammas: f64 = (1..=horizon).map(|t| scalar_gramian(rho, t)).sum();
    Ok(gap * gammas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// Mean of `Σ_t (‖X_{t+1} − AX_t‖² − ‖X_{t+1} − ρOX_t‖²)`, the same
    /// scaling as [`trajectory_kl`].
    pub estimate: f64,
    pub standard_error: f64,
    /// Half of `estimate`: the log-likelihood ratio, i.e. the KL divergence.
    pub log_likelihood_ratio: f64,
    pub trials: usize,
}

/// Simulates `X_1 ~ N(0, I)`, `X_{t+1} = ρOX_t + η_t` for `t = 1..T` and
/// averages the squared-residual gap between the two transition models.
pub fn kl_monte_carlo(
    rho: f64,
    o: &Matrix,
    a: &Matrix,
    horizon: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<KlEstimate> {
    check_orthogonal(o)?;
    if o.shape() != a.shape() || trials < 2 {
        return Err(invalid("need matching shapes and at least two trials"));
    }
    let d = o.rows();
    let truth = o.scale(rho);
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.substream(i);
            let mut x: Vec<f64> = (0..d).map(|_| r.next_gaussian()).collect();
            let mut total = 0.0;
            for _ in 0..horizon {
                let mean_true = truth.mat_vec(&x);
                let mean_alt = a.mat_vec(&x);
                let next: Vec<f64> = mean_true.iter().map(|m| m + r.next_gaussian()).collect();
                for k in 0..d {
                    let e_alt = next[k] - mean_alt[k];
                    let e_true = next[k] - mean_true[k];
                    total += e_alt * e_alt - e_true * e_true;
                }
                x = next;
            }
            total
        })
        .collect();
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KlEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
        log_likelihood_ratio: 0.5 * mean,
        trials,
    })
}

/// `(1 − 2δ) log(N/(2δ))`.
pub fn birge_threshold(n_alternatives: usize, delta: f64) -> Result<f64> {
    if n_alternatives < 1 || !(delta > 0.0 && delta < 0.5) {
        return Err(invalid("need N >= 1 and delta in (0, 1/2)"));
    }
    Ok((1.0 - 2.0 * delta) * (n_alternatives as f64 / (2.0 * delta)).ln())
}

/// `(‖exp(X+Y) − exp(X) − Y‖_op, max(‖X‖_op, ‖Y‖_op))`.
pub fn exp_map_remainder(x: &Matrix, y: &Matrix) -> (f64, f64) {
    let sum = x + y;
    let r = &(&matrix_exp(&sum) - &matrix_exp(x)) - y;
    (operator_norm(&r), operator_norm(x).max(operator_norm(y)))
}

/// `e^{2K} − 1 − 2K`.
pub fn exp_map_remainder_bound(k: f64) -> f64 {
    (2.0 * k).exp_m1() - 2.0 * k
}
