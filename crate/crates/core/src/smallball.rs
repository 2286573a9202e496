//! Exact and Monte Carlo checks of the block martingale small-ball (BMSB)
//! condition, the small-ball tail bound, martingale concentration and the
//! one-step Gaussian moment generating function.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lds::{gramian_series, LinearSystem};
use crate::numerics::{adaptive_simpson, normal_sf, Matrix, RngStream};

/// `(k, Γ_sb, p)`. The scalar condition with scale `ν` is `Γ_sb = [ν²]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsbSpec {
    pub k: usize,
    pub gamma_sb: Matrix,
    pub p: f64,
}

impl BmsbSpec {
    pub fn new(k: usize, gamma_sb: Matrix, p: f64) -> Result<Self> {
        if k == 0 || !(p > 0.0 && p <= 1.0) {
            return Err(invalid(format!("need k >= 1 and p in (0, 1], got k = {k}, p = {p}")));
        }
        crate::numerics::spd_eigen(&gamma_sb)?;
        Ok(Self { k, gamma_sb, p })
    }

    pub fn scalar(k: usize, nu: f64, p: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(invalid(format!("nu must be positive, got {nu}")));
        }
        Self::new(k, Matrix::scalar(nu * nu), p)
    }

    /// `Γ_sb = σ²Γ_{⌊k/2⌋}`, `p = 3/20`, the certificate for linear systems.
    pub fn for_lds(sys: &LinearSystem, k: usize) -> Result<Self> {
        let half = crate::bounds::half_block(k);
        let gs = gramian_series(sys, half)?;
        Self::new(k, gs.gamma(half).scale(sys.sigma2), crate::bounds::LDS_SMALL_BALL_P)
    }
}

/// One-sided check `empirical ≤ bound + 3·SE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckResult {
    pub empirical_prob: f64,
    pub theoretical_bound: f64,
    pub trials: usize,
    pub standard_error: f64,
    pub passed: bool,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub note: Option<String>,
}

impl TailCheckResult {
    fn from_count(
        hits: usize,
        trials: usize,
        bound: f64,
        parameters: &[(&str, f64)],
        seed: u64,
    ) -> Self {
        let p = hits as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        Self {
            empirical_prob: p,
            theoretical_bound: bound,
            trials,
            standard_error: se,
            passed: p <= bound + 3.0 * se,
            parameters: parameters.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            seed,
            note: None,
        }
    }
}

/// Per anchor/direction outcome of [`verify_bmsb_lds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsbCell {
    pub anchor: usize,
    pub direction: usize,
    /// Monte Carlo block-averaged exceedance.
    pub empirical: f64,
    pub standard_error: f64,
    /// Exact Gaussian value.
    pub exact: f64,
}

/// Lower-bound check: every cell must reach `p − 3·SE` empirically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsbReport {
    pub k: usize,
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<BmsbCell>,
    pub min_exact: f64,
    pub passed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &Matrix, w: &[f64]) -> f64 {
    dot(w, &m.mat_vec(w))
}

/// `P(|m + sZ| ≥ ν)` for standard normal `Z`.
pub fn gaussian_exceedance(mean: f64, sd: f64, nu: f64) -> f64 {
    if sd == 0.0 {
        return if mean.abs() >= nu { 1.0 } else { 0.0 };
    }
    normal_sf((nu - mean) / sd) + normal_sf((nu + mean) / sd)
}

/// Exact `(1/k) Σ_{i=1}^k P(|⟨w, X_{j+i}⟩| ≥ √(wᵀΓ_sb w) | X_j = x)` using
/// `⟨w, X_{j+i}⟩ ~ N(⟨w, Aⁱx⟩, σ² wᵀΓ_i w)`. Inputs are ignored.
pub fn exact_block_exceedance(sys: &LinearSystem, spec: &BmsbSpec, anchor: &[f64], w: &[f64]) -> Result<f64> {
    let d = sys.dim();
    if anchor.len() != d || w.len() != d || spec.gamma_sb.rows() != d {
        return Err(Error::DimensionMismatch("anchor, direction and Γ_sb must match the state dimension".into()));
    }
    let nu = quad_form(&spec.gamma_sb, w).sqrt();
    let gs = gramian_series(sys, spec.k)?;
    let mut x = anchor.to_vec();
    let mut total = 0.0;
    for i in 1..=spec.k {
        x = sys.a.mat_vec(&x);
        let sd = (sys.sigma2 * quad_form(gs.gamma(i), w)).sqrt();
        total += gaussian_exceedance(dot(w, &x), sd, nu);
    }
    Ok(total / spec.k as f64)
}

/// Estimates the block-averaged exceedance at each anchor state and unit
/// direction by simulating `trials` continuations, alongside the exact value.
pub fn verify_bmsb_lds(
    sys: &LinearSystem,
    spec: &BmsbSpec,
    anchors: &[Vec<f64>],
    directions: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<BmsbReport> {
    if anchors.is_empty() || directions.is_empty() || trials < 2 {
        return Err(invalid("need at least one anchor, one direction and two trials"));
    }
    for w in directions {
        let norm = dot(w, w).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("direction has norm {norm}, expected 1")));
        }
    }
    let d = sys.dim();
    let sigma = sys.sigma();
    let master = RngStream::new(seed, 0);
    let mut cells = Vec::new();
    for (ai, x0) in anchors.iter().enumerate() {
        for (wi, w) in directions.iter().enumerate() {
            let exact = exact_block_exceedance(sys, spec, x0, w)?;
            let nu = quad_form(&spec.gamma_sb, w).sqrt();
            let cell_id = ((ai as u64) << 32) | wi as u64;
            let fractions: Vec<f64> = (0..trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = master.substream(cell_id).substream(trial);
                    let mut x = x0.clone();
                    let mut hits = 0usize;
                    for _ in 0..spec.k {
                        let mut next = sys.a.mat_vec(&x);
                        for v in next.iter_mut().take(d) {
                            *v += sigma * rng.next_gaussian();
                        }
                        x = next;
                        hits += (dot(w, &x).abs() >= nu) as usize;
                    }
                    hits as f64 / spec.k as f64
                })
                .collect();
            let n = trials as f64;
            let mean = fractions.iter().sum::<f64>() / n;
            let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
            cells.push(BmsbCell {
                anchor: ai,
                direction: wi,
                empirical: mean,
                standard_error: (var / n).sqrt(),
                exact,
            });
        }
    }
    let passed = cells.iter().all(|c| c.empirical >= spec.p - 3.0 * c.standard_error);
    let min_exact = cells.iter().map(|c| c.exact).fold(f64::INFINITY, f64::min);
    Ok(BmsbReport {
        k: spec.k,
        p: spec.p,
        trials,
        seed,
        cells,
        min_exact,
        passed,
    })
}

/// Sum of `f(trial)` over independent trials, each with its own substream.
fn count_events(trials: usize, seed: u64, f: impl Fn(&mut RngStream) -> bool + Sync) -> usize {
    let master = RngStream::new(seed, 0);
    (0..trials as u64)
        .into_par_iter()
        .map(|i| f(&mut master.substream(i)) as usize)
        .sum()
}

/// `exp(−⌊T/k⌋p²/8)` bounds `P[Σ_{t≤T} Z_t² ≤ ν²p²k⌊T/k⌋/8]` for a
/// `(k, ν, p)`-BMSB process.
pub fn smallball_tail_bound(k: usize, p: f64, horizon: usize) -> f64 {
    (-((horizon / k) as f64) * p * p / 8.0).exp()
}

/// Checks the small-ball tail bound on `Z_t = X_t` of the scalar system
/// `X_{t+1} = aX_t + η_t`, `X_0 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn smallball_tail_check(
    a: f64,
    sigma: f64,
    k: usize,
    nu: f64,
    p: f64,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<TailCheckResult> {
    if k == 0 || horizon == 0 || trials == 0 || !(sigma >= 0.0) || !(nu >= 0.0) || !(0.0..=1.0).contains(&p) {
        return Err(invalid("need k, T, trials >= 1, sigma, nu >= 0 and p in [0, 1]"));
    }
    let bound = smallball_tail_bound(k, p, horizon);
    let threshold = nu * nu * p * p * (k * (horizon / k)) as f64 / 8.0;
    let hits = count_events(trials, seed, |rng| {
        let mut x = 0.0;
        let mut s = 0.0;
        for _ in 0..horizon {
            x = a * x + sigma * rng.next_gaussian();
            s += x * x;
        }
        s <= threshold
    });
    Ok(TailCheckResult::from_count(
        hits,
        trials,
        bound,
        &[
            ("a", a),
            ("sigma", sigma),
            ("k", k as f64),
            ("nu", nu),
            ("p", p),
            ("T", horizon as f64),
            ("threshold", threshold),
        ],
        seed,
    ))
}

/// Part (a) bound `exp(−α²/(2σ²β))`.
pub fn martingale_bound(alpha: f64, sigma: f64, beta: f64) -> f64 {
    (-alpha * alpha / (2.0 * sigma * sigma * beta)).exp()
}

/// Part (b) bound `log⌈β₊/β₋⌉ exp(−α²/(6σ²))`. The second component is true
/// when `β₊ = β₋`, where the prefactor vanishes and the bound reads 0.
pub fn martingale_ratio_bound(alpha: f64, sigma: f64, beta_minus: f64, beta_plus: f64) -> Result<(f64, bool)> {
    if !(beta_minus > 0.0 && beta_plus >= beta_minus) {
        return Err(invalid("need 0 < beta_minus <= beta_plus"));
    }
    if beta_plus == beta_minus {
        return Ok((0.0, true));
    }
    let prefactor = (beta_plus / beta_minus).ceil().ln();
    Ok((prefactor * (-alpha * alpha / (6.0 * sigma * sigma)).exp(), false))
}

/// Checks `P[{Σ Z_tW_t ≥ α} ∩ {Σ Z_t² ≤ β}] ≤ exp(−α²/(2σ²β))` with
/// `Z_t = X_t`, `W_t = η_t` for `t = 1..T` on the scalar system.
pub fn martingale_tail_check(
    a: f64,
    sigma: f64,
    horizon: usize,
    alpha: f64,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<TailCheckResult> {
    if !(sigma > 0.0 && alpha > 0.0 && beta > 0.0) || horizon == 0 || trials == 0 {
        return Err(invalid("need positive sigma, alpha, beta, T and trials"));
    }
    let bound = martingale_bound(alpha, sigma, beta);
    let hits = count_events(trials, seed, |rng| {
        let mut z = sigma * rng.next_gaussian();
        let (mut szw, mut szz) = (0.0, 0.0);
        for _ in 0..horizon {
            let w = sigma * rng.next_gaussian();
            szw += z * w;
            szz += z * z;
            z = a * z + w;
        }
        szw >= alpha && szz <= beta
    });
    Ok(TailCheckResult::from_count(
        hits,
        trials,
        bound,
        &[
            ("a", a),
            ("sigma", sigma),
            ("T", horizon as f64),
            ("alpha", alpha),
            ("beta", beta),
        ],
        seed,
    ))
}

/// Scalar dynamics covered by the default verification grids.
pub const DEFAULT_GRID_A: [f64; 4] = [0.0, 0.5, 0.9, 1.0];

/// Tail check at every `a ∈ DEFAULT_GRID_A`, `k ∈ {1, 2, 4}` with `σ = 1`,
/// `ν = √γ_{k′}(a)`, `T = 40`; point `i` uses seed `seed + i`.
pub fn default_tail_grid(p: f64, trials: usize, seed: u64) -> Result<Vec<TailCheckResult>> {
    let mut out = Vec::new();
    for &a in &DEFAULT_GRID_A {
        for k in [1usize, 2, 4] {
            let nu = crate::lds::scalar_gramian(a, crate::bounds::half_block(k)).sqrt();
            let s = seed.wrapping_add(out.len() as u64);
            out.push(smallball_tail_check(a, 1.0, k, nu, p, 40, trials, s)?);
        }
    }
    Ok(out)
}

/// Martingale check at every `a ∈ DEFAULT_GRID_A`, `T ∈ {10, 50}` with
/// `σ = 1`, `β = Tγ_T(a)` and `α ∈ {1, 2, 3}·√β`; point `i` uses seed
/// `seed + i`.
pub fn default_martingale_grid(trials: usize, seed: u64) -> Result<Vec<TailCheckResult>> {
    let mut out = Vec::new();
    for &a in &DEFAULT_GRID_A {
        for horizon in [10usize, 50] {
            let beta = horizon as f64 * crate::lds::scalar_gramian(a, horizon);
            for level in [1.0, 2.0, 3.0] {
                let s = seed.wrapping_add(out.len() as u64);
                out.push(martingale_tail_check(a, 1.0, horizon, level * beta.sqrt(), beta, trials, s)?);
            }
        }
    }
    Ok(out)
}

/// `E exp(ν/2 (ax+η)² + μxη)` for `η ~ N(0, 1)`:
/// `exp(x²(νa² + 2νaμ + μ²)/(2(1−ν))) / √(1−ν)`.
pub fn one_step_mgf(a: f64, nu: f64, mu: f64, x: f64) -> Result<f64> {
    if !(nu < 1.0) {
        return Err(Error::NuOutOfRange { nu });
    }
    let e = x * x * (nu * a * a + 2.0 * nu * a * mu + mu * mu) / (2.0 * (1.0 - nu));
    Ok(e.exp() / (1.0 - nu).sqrt())
}

/// The same expectation by adaptive Simpson over twelve standard deviations
/// either side of the integrand's mode.
pub fn one_step_mgf_quadrature(a: f64, nu: f64, mu: f64, x: f64) -> Result<f64> {
    if !(nu < 1.0) {
        return Err(Error::NuOutOfRange { nu });
    }
    let g = |eta: f64| 0.5 * nu * (a * x + eta).powi(2) + mu * x * eta - 0.5 * eta * eta;
    let mode = x * (nu * a + mu) / (1.0 - nu);
    let sd = 1.0 / (1.0 - nu).sqrt();
    let peak = g(mode);
    let integral = adaptive_simpson(|eta| (g(eta) - peak).exp(), mode - 12.0 * sd, mode + 12.0 * sd, 1e-12 * sd);
    Ok(integral * peak.exp() / (2.0 * std::f64::consts::PI).sqrt())
}
