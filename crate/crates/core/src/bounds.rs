//! Finite-sample upper bounds, scalar sample complexities and lower-bound
//! thresholds.
//!
//! Universal constants the theory leaves unspecified (`c`, `c0`, `C`) are
//! explicit arguments and every report echoes the constants it used.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lds::{check_delta, scalar_gramian, GramianSeries, LinearSystem};
use crate::numerics::{log_det_ratio, spd_eigen, sym_eigen, Matrix};

/// Small-ball probability for linear systems.
pub const LDS_SMALL_BALL_P: f64 = 3.0 / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stable,
    Marginal,
    Unstable,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Stable => "stable",
            Regime::Marginal => "marginal",
            Regime::Unstable => "unstable",
        }
    }
}

/// An evaluated bound. `value` is absent when the horizon precondition
/// fails (`feasible == false`) or the bound is vacuous (see `note`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: Option<f64>,
    pub constants_used: BTreeMap<String, f64>,
    pub block_length: Option<usize>,
    pub regime: Option<Regime>,
    pub feasible: bool,
    pub note: Option<String>,
}

impl BoundReport {
    fn new(constants: &[(&str, f64)]) -> Self {
        Self {
            value: None,
            constants_used: constants.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            block_length: None,
            regime: None,
            feasible: true,
            note: None,
        }
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    fn constant(&self, name: &str) -> f64 {
        self.constants_used.get(name).copied().unwrap_or(f64::NAN)
    }

    /// The bound value, or `InfeasibleHorizon` when the precondition failed.
    pub fn into_value(self) -> Result<f64> {
        match self.value {
            Some(v) => Ok(v),
            None if !self.feasible => Err(Error::InfeasibleHorizon {
                horizon: self.constant("T") as usize,
                required: self.constant("T_required"),
            }),
            None => Err(invalid(
                self.note.unwrap_or_else(|| "bound has no finite value".into()),
            )),
        }
    }
}

/// Certificate `(k, Γ_sb, p)` with envelope `Γ̄` for the main theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallCert {
    pub k: usize,
    pub gamma_sb: Matrix,
    pub p: f64,
    pub gamma_bar: Matrix,
}

/// `(10k/p²)(log(1/δ) + 2d log(10/p) + log det(Γ̄Γ_sb⁻¹))`.
pub fn main_theorem_required_horizon(k: usize, p: f64, d: usize, delta: f64, log_det: f64) -> f64 {
    10.0 * k as f64 / (p * p)
        * ((1.0 / delta).ln() + 2.0 * d as f64 * (10.0 / p).ln() + log_det)
}

/// Half block length used for the small-ball Gramian, at least 1.
pub fn half_block(k: usize) -> usize {
    (k / 2).max(1)
}

/// Small-ball certificate `Γ_sb = σ²Γ_{⌊k/2⌋}`, `Γ̄ = (d/δ)σ²Γ_T`,
/// `p = 3/20`, with the largest `k` meeting the main-theorem horizon
/// condition. `gs` must cover at least `T` steps.
pub fn lds_cert(sys: &LinearSystem, gs: &GramianSeries, horizon: usize, delta: f64) -> Result<SmallBallCert> {
    check_delta(delta)?;
    if horizon < 1 || gs.horizon() < horizon {
        return Err(invalid(format!(
            "Gramian series of length {} does not cover T = {horizon}",
            gs.horizon()
        )));
    }
    let d = sys.dim();
    let p = LDS_SMALL_BALL_P;
    let log_det_t = gs.log_det[horizon - 1];
    let envelope = d as f64 * (d as f64 / delta).ln();
    let k = (1..=horizon)
        .rev()
        .find(|&k| {
            let ld = envelope + log_det_t - gs.log_det[half_block(k) - 1];
            horizon as f64 >= main_theorem_required_horizon(k, p, d, delta, ld)
        })
        .ok_or(Error::NoFeasibleK { horizon })?;
    Ok(SmallBallCert {
        k,
        gamma_sb: gs.gamma(half_block(k)).scale(sys.sigma2),
        p,
        gamma_bar: gs.gamma(horizon).scale(d as f64 / delta * sys.sigma2),
    })
}

/// Explicit-constant bound
/// `(90σ/p)√((n + d log(10/p) + log det(Γ̄Γ_sb⁻¹) + log(1/δ)) / (T λ_min(Γ_sb)))`
/// holding with probability `1 − 3δ`.
pub fn main_theorem_bound(
    cert: &SmallBallCert,
    horizon: usize,
    d: usize,
    n: usize,
    sigma: f64,
    delta: f64,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(sigma > 0.0) || !(cert.p > 0.0 && cert.p <= 1.0) || cert.k == 0 {
        return Err(invalid("need sigma > 0, p in (0, 1] and k >= 1"));
    }
    if cert.gamma_sb.rows() != d || cert.gamma_bar.rows() != d {
        return Err(Error::DimensionMismatch(format!(
            "certificate Gramians are {}x{}, d = {d}",
            cert.gamma_sb.rows(),
            cert.gamma_sb.rows()
        )));
    }
    let p = cert.p;
    let lambda_min = spd_eigen(&cert.gamma_sb)?.min();
    let log_det = log_det_ratio(&cert.gamma_bar, &cert.gamma_sb)?;
    let required = main_theorem_required_horizon(cert.k, p, d, delta, log_det);
    let inner = n as f64 + d as f64 * (10.0 / p).ln() + log_det + (1.0 / delta).ln();
    let big_k = 20.0 * sigma * inner.sqrt();
    let mut report = BoundReport::new(&[
        ("p", p),
        ("sigma", sigma),
        ("delta", delta),
        ("failure_probability", 3.0 * delta),
        ("T", horizon as f64),
        ("T_required", required),
        ("k", cert.k as f64),
        ("d", d as f64),
        ("n", n as f64),
        ("log_det_ratio", log_det),
        ("lambda_min_sb", lambda_min),
        ("K", big_k),
    ]);
    report.block_length = Some(cert.k);
    if (horizon as f64) < required {
        report.feasible = false;
        return Ok(report);
    }
    let value = 90.0 * sigma / p * (inner / (horizon as f64 * lambda_min)).sqrt();
    Ok(report.with_value(value))
}

/// Bound for input-driven systems with white-noise inputs:
/// `Cσ/√(T λ_min(Γ_in,k)) · √(d log(tr(Γ_in,T)/(δ λ_min(Γ_in,k))))`, where
/// `Γ_in,t = σ²Γ_t + σ_u²Γ^B_t`, valid when
/// `T/k ≥ c d log(tr(Γ_in,T)/(δ λ_min(Γ_in,k)))`.
#[allow(clippy::too_many_arguments)]
pub fn input_driven_bound(
    sys: &LinearSystem,
    gs: &GramianSeries,
    k: usize,
    horizon: usize,
    delta: f64,
    c: f64,
    big_c: f64,
) -> Result<BoundReport> {
    let (Some(_), Some(su2)) = (&sys.b, sys.input_sigma2) else {
        return Err(Error::MissingInputModel);
    };
    let Some(control) = &gs.control_gramians else {
        return Err(Error::MissingInputModel);
    };
    check_delta(delta)?;
    if k < 1 || k > horizon || gs.horizon() < horizon {
        return Err(invalid(format!(
            "need 1 <= k <= T <= Gramian horizon, got k = {k}, T = {horizon}"
        )));
    }
    let s2 = sys.sigma2;
    let combined = |t: usize| &gs.gamma(t).scale(s2) + &control[t - 1].scale(su2);
    let lambda_min = sym_eigen(&combined(k))?.min();
    let trace_t = combined(horizon).trace();
    let d = sys.dim() as f64;
    let log_term = (trace_t / (delta * lambda_min)).ln();
    let required = k as f64 * c * d * log_term;

    let mut report = BoundReport::new(&[
        ("c", c),
        ("C", big_c),
        ("sigma", s2.sqrt()),
        ("sigma_u", su2.sqrt()),
        ("delta", delta),
        ("T", horizon as f64),
        ("T_required", required),
        ("k", k as f64),
        ("lambda_min_input", lambda_min),
        ("trace_input_T", trace_t),
    ]);
    report.block_length = Some(k);
    if (horizon as f64) < required {
        report.feasible = false;
        return Ok(report);
    }
    let value = big_c * s2.sqrt() / (horizon as f64 * lambda_min).sqrt() * (d * log_term).sqrt();
    Ok(report.with_value(value))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps must lie in (0, 1), got {eps}")))
    }
}

/// Scalar regime of `|a|` relative to `1 + ε`.
pub fn scalar_regime(a: f64, eps: f64) -> Regime {
    let r = a.abs();
    if r < 1.0 {
        Regime::Stable
    } else if r <= 1.0 + eps {
        Regime::Marginal
    } else {
        Regime::Unstable
    }
}

/// Horizon after which `|â − a| ≤ ε` with probability `1 − δ` for scalar OLS.
pub fn scalar_sample_complexity(a: f64, eps: f64, delta: f64) -> Result<BoundReport> {
    check_eps(eps)?;
    check_delta(delta)?;
    let l = (2.0 / delta).ln();
    let r = a.abs();
    let raw = if r <= 1.0 + eps {
        8.0 / eps * l + 4.0 / (eps * eps) * (1.0 - (r - eps).powi(2)) * l
    } else {
        let m = r - eps;
        f64::max(8.0 / (m * m - 1.0) * l, 4.0 * (1.0 / eps).ln() / m.ln() + 8.0 * l)
    };
    let mut report = BoundReport::new(&[("a", a), ("eps", eps), ("delta", delta), ("raw", raw)]);
    report.regime = Some(scalar_regime(a, eps));
    Ok(report.with_value(raw.ceil()))
}

/// Tail bound `2 exp(−ε² Σ_{t=1}^{T−1} ρ_t / (2(1+α)))` built from the
/// capped recursion `ρ_{T−1} = 1`, `ρ_t = 1 + rρ_{t+1}` while
/// `ρ_{t+1} ≤ α/ε²` and `α/ε²` otherwise, `r = (|a|−ε)²/(1+α)`.
pub fn scalar_mgf_probability(a: f64, eps: f64, horizon: usize, alpha: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(alpha > 0.0) || horizon < 2 {
        return Err(invalid("need alpha > 0 and T >= 2"));
    }
    let sum: f64 = mgf_rho_sequence(a, eps, horizon, alpha).iter().sum();
    Ok((2.0 * (-eps * eps * sum / (2.0 * (1.0 + alpha))).exp()).clamp(0.0, 1.0))
}

/// `(ρ_{T−1}, ρ_{T−2}, …, ρ_1)`, latest index first.
pub fn mgf_rho_sequence(a: f64, eps: f64, horizon: usize, alpha: f64) -> Vec<f64> {
    let r = (a.abs() - eps).powi(2) / (1.0 + alpha);
    let cap = alpha / (eps * eps);
    let mut seq = Vec::with_capacity(horizon - 1);
    let mut rho = 1.0;
    seq.push(rho);
    for _ in 1..horizon - 1 {
        rho = if rho <= cap { 1.0 + r * rho } else { cap };
        seq.push(rho);
    }
    seq
}

/// Largest `T ≥ 0` with `f(T) ≤ threshold` for nondecreasing `f`, or `None`
/// when no such bound exists below `2^62`.
fn largest_horizon(threshold: f64, f: impl Fn(u64) -> f64) -> Option<u64> {
    const CAP: u64 = 1 << 62;
    if f(1) > threshold {
        return Some(0);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while f(hi) <= threshold {
        if hi >= CAP {
            return None;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// `Σ_{t=1}^T a^{2t} = a²γ_T(a)`.
fn shifted_gramian(a: f64, t: u64) -> f64 {
    a * a * scalar_gramian(a, t as usize)
}

/// Largest `T` with `T Σ_{t=1}^T a^{2t} ≤ log(1/(2δ))/(8ε²)`; below it any
/// estimator errs by `ε` with probability at least `δ` at one of two nearby
/// systems. The sum starts at `t = 1`, so `a = 0` has no finite threshold.
pub fn scalar_lower_bound_t(a: f64, eps: f64, delta: f64) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 0.25) || !(eps > 0.0) {
        return Err(invalid("need delta in (0, 1/4) and eps > 0"));
    }
    let threshold = (1.0 / (2.0 * delta)).ln() / (8.0 * eps * eps);
    let mut report = BoundReport::new(&[("a", a), ("eps", eps), ("delta", delta), ("threshold", threshold)]);
    report.regime = Some(unit_regime(a));
    match largest_horizon(threshold, |t| t as f64 * shifted_gramian(a, t)) {
        Some(t) => Ok(report.with_value(t as f64)),
        None => {
            report.note = Some("unbounded".into());
            Ok(report)
        }
    }
}

fn unit_regime(rho: f64) -> Regime {
    let r = rho.abs();
    if r < 1.0 {
        Regime::Stable
    } else if r == 1.0 {
        Regime::Marginal
    } else {
        Regime::Unstable
    }
}

/// Largest `T` with `T γ_T(ρ) ≤ c₀(d + log(1/δ))/ε²` for the scaled
/// orthogonal class `{ρO}`.
pub fn orthogonal_lower_bound_t(rho: f64, d: usize, eps: f64, delta: f64, c0: f64) -> Result<BoundReport> {
    if d < 2 || !(delta > 0.0 && delta < 0.25) || !(eps > 0.0) || !(c0 > 0.0) {
        return Err(invalid("need d >= 2, delta in (0, 1/4), eps > 0 and c0 > 0"));
    }
    let limit = rho.abs() / 2048.0;
    if eps > limit {
        return Err(Error::EpsTooLarge { eps, limit });
    }
    let threshold = c0 * (d as f64 + (1.0 / delta).ln()) / (eps * eps);
    let mut report = BoundReport::new(&[
        ("rho", rho),
        ("d", d as f64),
        ("eps", eps),
        ("delta", delta),
        ("c0", c0),
        ("threshold", threshold),
    ]);
    report.regime = Some(unit_regime(rho));
    let t = largest_horizon(threshold, |t| t as f64 * scalar_gramian(rho, t as usize))
        .expect("gamma_T >= 1 keeps the threshold finite");
    Ok(report.with_value(t as f64))
}

/// Upper bound `2d log cond(S) + d log(T/k) + 4 log T Σ_{b ≥ 2} b²` on
/// `log det(Γ_T Γ_k⁻¹)` for `A = SJS⁻¹` with Jordan block sizes `block_sizes`
/// (empty or all ones when diagonalizable).
pub fn diag_logdet_bound(cond_s: f64, d: usize, horizon: usize, k: usize, block_sizes: &[usize]) -> Result<f64> {
    if !(cond_s >= 1.0) || horizon < d || k < 1 {
        return Err(invalid("need cond(S) >= 1, T >= d and k >= 1"));
    }
    let jordan: f64 = block_sizes
        .iter()
        .filter(|&&b| b >= 2)
        .map(|&b| (b * b) as f64)
        .sum();
    let t = horizon as f64;
    let df = d as f64;
    Ok(2.0 * df * cond_s.ln() + df * (t / k as f64).ln() + 4.0 * t.ln() * jordan)
}

/// Rate for diagonalizable systems in terms of the least excitable mode
/// `underline_rho`:
/// `C√(d log(cond(S)/δ) / (T(1 + cond(S)⁻² Σ_{s=1}^{K−1} ρ̲^{2s})))` with
/// `K = ⌊T/(c d log(cond(S)/δ))⌋`.
pub fn diag_rate_bound(
    cond_s: f64,
    d: usize,
    horizon: usize,
    delta: f64,
    underline_rho: f64,
    c: f64,
    big_c: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if !(cond_s >= 1.0) || d == 0 || !(c > 0.0) {
        return Err(invalid("need cond(S) >= 1, d >= 1 and c > 0"));
    }
    let log_term = (cond_s / delta).ln();
    let t = horizon as f64;
    let big_k = (t / (c * d as f64 * log_term)).floor();
    let mut report = BoundReport::new(&[
        ("c", c),
        ("C", big_c),
        ("delta", delta),
        ("T", t),
        ("T_required", c * d as f64 * log_term),
        ("underline_rho", underline_rho),
        ("cond_s", cond_s),
    ]);
    report.regime = Some(unit_regime(underline_rho));
    if big_k < 1.0 {
        report.feasible = false;
        return Ok(report);
    }
    let k = big_k as usize;
    report.block_length = Some(k);
    let excitation = scalar_gramian(underline_rho, k) - 1.0;
    let value = big_c * (d as f64 * log_term / (t * (1.0 + excitation / (cond_s * cond_s)))).sqrt();
    Ok(report.with_value(value))
}

/// Regime of a scalar system at horizon `T`: stable when
/// `|a| ≤ 1 − c log(1/δ)/T`, marginal up to and including `1 + 1/T`.
pub fn horizon_regime(a: f64, horizon: usize, delta: f64, c: f64) -> Regime {
    let t = horizon as f64;
    let r = a.abs();
    if r <= 1.0 - c * (1.0 / delta).ln() / t {
        Regime::Stable
    } else if r <= 1.0 + 1.0 / t {
        Regime::Marginal
    } else {
        Regime::Unstable
    }
}

/// Order of the `1 − δ` error quantile in each regime: `√(log(1/δ)(1−|a|)/T)`,
/// `log(1/δ)/T` and `log(1/δ)/|a|^T`.
pub fn scalar_rate(a: f64, horizon: usize, delta: f64, c: f64) -> (Regime, f64) {
    let t = horizon as f64;
    let l = (1.0 / delta).ln();
    let regime = horizon_regime(a, horizon, delta, c);
    let scale = match regime {
        Regime::Stable => (l * (1.0 - a.abs()) / t).sqrt(),
        Regime::Marginal => l / t,
        Regime::Unstable => l / a.abs().powf(t),
    };
    (regime, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::gramian_series;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn worked_main_theorem_example() {
        let cert = SmallBallCert {
            k: 1,
            gamma_sb: Matrix::scalar(1.0),
            p: LDS_SMALL_BALL_P,
            gamma_bar: Matrix::scalar(10.0),
        };
        let r = main_theorem_bound(&cert, 10_000, 1, 1, 1.0, 0.1).unwrap();
        let inner = 1.0 + (200.0f64 / 3.0).ln() + 2.0 * 10f64.ln();
        let expect = 600.0 * (inner / 1e4).sqrt();
        assert!(close(r.value.unwrap(), expect, 1e-14));
        assert!((expect - 18.787).abs() < 1e-3);

        let r2 = main_theorem_bound(&cert, 20_000, 1, 1, 1.0, 0.1).unwrap();
        assert!(close(r.value.unwrap() / r2.value.unwrap(), 2f64.sqrt(), 1e-14));

        let small = main_theorem_bound(&cert, 100, 1, 1, 1.0, 0.1).unwrap();
        assert!(!small.feasible && small.value.is_none());
        assert!(matches!(small.into_value(), Err(Error::InfeasibleHorizon { horizon: 100, .. })));
    }

    #[test]
    fn cert_scalar_a_zero() {
        let sys = LinearSystem::scalar(0.0, 1.0).unwrap();
        let gs = gramian_series(&sys, 10_000).unwrap();
        let cert = lds_cert(&sys, &gs, 10_000, 0.1).unwrap();
        assert!(close(cert.gamma_sb[(0, 0)], 1.0, 1e-15));
        assert!(close(cert.gamma_bar[(0, 0)], 10.0, 1e-15));
        assert_eq!(cert.p, 0.15);
        assert_eq!(cert.k, 1);
    }

    #[test]
    fn sample_complexity_examples() {
        let r = scalar_sample_complexity(0.0, 0.1, 0.2).unwrap();
        assert_eq!(r.value, Some(1097.0));
        assert_eq!(r.regime, Some(Regime::Stable));
        let r = scalar_sample_complexity(1.2, 0.05, 0.2).unwrap();
        assert_eq!(r.value, Some(105.0));
        assert_eq!(r.regime, Some(Regime::Unstable));
    }

    #[test]
    fn mgf_hand_recursion() {
        let seq = mgf_rho_sequence(2.0, 0.5, 8, 0.625);
        let r = 2.25 / 1.625;
        assert!(close(r, 1.384_615, 1e-6));
        let expect = [1.0, 1.0 + r, 1.0 + r * (1.0 + r), 2.5, 1.0 + 2.5 * r, 2.5, 1.0 + 2.5 * r];
        for (a, b) in seq.iter().zip(expect) {
            assert!(close(*a, b, 1e-12), "{seq:?}");
        }
    }

    #[test]
    fn mgf_r_zero() {
        let (eps, alpha, t) = (0.3, 0.5, 20);
        let p = scalar_mgf_probability(0.3, eps, t, alpha).unwrap();
        let expect = 2.0 * (-eps * eps * (t - 1) as f64 / (2.0 * (1.0 + alpha))).exp();
        assert!(close(p, expect.min(1.0), 1e-14));
    }

    #[test]
    fn scalar_lower_examples() {
        let r = scalar_lower_bound_t(1.0, 0.1, 0.05).unwrap();
        assert_eq!(r.value, Some(5.0));
        let r = scalar_lower_bound_t(0.0, 0.1, 0.05).unwrap();
        assert_eq!(r.value, None);
        assert!(r.feasible);
        assert_eq!(r.note.as_deref(), Some("unbounded"));
    }

    #[test]
    fn orthogonal_lower_closed_form() {
        let (d, eps, delta) = (3, 1.0 / 4096.0, 0.1);
        let r = orthogonal_lower_bound_t(1.0, d, eps, delta, 1.0).unwrap();
        let tau: f64 = (d as f64 + 10f64.ln()) / (eps * eps);
        assert_eq!(r.value, Some(tau.sqrt().floor()));
        assert!(matches!(
            orthogonal_lower_bound_t(1.0, 3, 1.0 / 2000.0, 0.1, 1.0),
            Err(Error::EpsTooLarge { .. })
        ));
    }

    #[test]
    fn logdet_bound_examples() {
        assert_eq!(diag_logdet_bound(1.0, 3, 10, 10, &[]).unwrap(), 0.0);
        let v = diag_logdet_bound(1.0, 2, 100, 1, &[2]).unwrap();
        assert!((v - 82.893).abs() < 1e-3);
    }

    #[test]
    fn regime_boundary() {
        assert_eq!(horizon_regime(1.0 + 1.0 / 100.0, 100, 0.1, 1.0), Regime::Marginal);
        assert_eq!(horizon_regime(1.02, 100, 0.1, 1.0), Regime::Unstable);
        assert_eq!(horizon_regime(0.5, 100, 0.1, 1.0), Regime::Stable);
    }
}
