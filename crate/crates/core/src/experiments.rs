//! Monte Carlo sweep harness: error quantiles over a horizon grid, bound
//! curves, log-log slopes with bootstrap intervals, and the scalar regime
//! table.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{horizon_regime, lds_cert, main_theorem_bound, scalar_rate, Regime};
use crate::error::{Error, Result};
use crate::estimator::ols_fit_trajectory;
use crate::lds::{gramian_series, simulate, LinearSystem};
use crate::numerics::{matrix_exp, random_orthogonal, random_skew, Matrix, RngStream};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// System family swept over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Scalar { a: f64 },
    ScaledOrthogonal { rho: f64, d: usize, seed: u64 },
    Diagonalizable { spectrum: Vec<f64>, cond_s: f64, seed: u64 },
    Explicit { a: Matrix },
}

impl SystemSpec {
    /// The dynamics matrix `A`.
    pub fn build(&self) -> Result<Matrix> {
        match self {
            SystemSpec::Scalar { a } => Matrix::new(1, 1, vec![*a]),
            SystemSpec::ScaledOrthogonal { rho, d, seed } => {
                if *d == 0 {
                    return Err(Error::InvalidConfig("d must be positive".into()));
                }
                let mut rng = RngStream::new(*seed, 0);
                Ok(random_orthogonal(&mut rng, *d).scale(*rho))
            }
            SystemSpec::Diagonalizable {
                spectrum,
                cond_s,
                seed,
            } => diagonalizable(spectrum, *cond_s, *seed),
            SystemSpec::Explicit { a } => {
                if !a.is_square() {
                    return Err(Error::InvalidConfig("explicit A must be square".into()));
                }
                Ok(a.clone())
            }
        }
    }

    /// Regime by spectral radius where it is known from the spec.
    pub fn regime_label(&self, horizon: usize, delta: f64) -> &'static str {
        let radius = match self {
            SystemSpec::Scalar { a } => return horizon_regime(*a, horizon, delta, 1.0).as_str(),
            SystemSpec::ScaledOrthogonal { rho, .. } => rho.abs(),
            SystemSpec::Diagonalizable { spectrum, .. } => {
                spectrum.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
            SystemSpec::Explicit { .. } => return "unclassified",
        };
        horizon_regime(radius, horizon, delta, 1.0).as_str()
    }
}

/// `A = S diag(spectrum) S⁻¹` with `S = Q diag(s)`, `Q = exp(skew)` and
/// geometrically graded `s` so that `cond(S) = cond_s`.
pub fn diagonalizable(spectrum: &[f64], cond_s: f64, seed: u64) -> Result<Matrix> {
    let d = spectrum.len();
    if d == 0 || !(cond_s >= 1.0) {
        return Err(Error::InvalidConfig(
            "need a nonempty spectrum and cond_s >= 1".into(),
        ));
    }
    let mut rng = RngStream::new(seed, 0);
    let q = matrix_exp(&random_skew(&mut rng, d, 1.0));
    let scales: Vec<f64> = (0..d)
        .map(|i| {
            if d == 1 {
                1.0
            } else {
                cond_s.powf(i as f64 / (d - 1) as f64)
            }
        })
        .collect();
    let s = q.matmul(&Matrix::from_diag(&scales));
    let s_inv = Matrix::from_diag(&scales.iter().map(|v| 1.0 / v).collect::<Vec<_>>())
        .matmul(&q.transpose());
    Ok(s.matmul(&Matrix::from_diag(spectrum)).matmul(&s_inv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub system_spec: SystemSpec,
    pub sigma: f64,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.t_grid[0] == 0 {
            return Err(Error::InvalidConfig("T_grid must be nonempty and positive".into()));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("T_grid must be strictly increasing".into()));
        }
        if self.trials < 100 {
            return Err(Error::InvalidConfig(format!(
                "trials must be at least 100, got {}",
                self.trials
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1/2), got {}",
                self.delta
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Aggregates for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub trials: usize,
    pub median_error: f64,
    pub quantile_error: f64,
    pub mean_sigma_min: f64,
    pub overflow_count: usize,
    /// Errors above `bound_value`, when a bound applies.
    pub failure_count: Option<usize>,
    pub bound_value: Option<f64>,
    /// Sorted operator-norm errors of the non-overflowed trials.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellRecord>,
    /// `(slope, 95% half-width)` of log median error against log T.
    pub fitted_slope: Option<(f64, f64)>,
    pub regime_label: String,
}

pub const CSV_HEADER: &str = "T,trials,median_err,q_err,mean_sigma_min,overflow_count,bound_value";

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for c in &self.cells {
            write!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e},{},",
                c.horizon, c.trials, c.median_error, c.quantile_error, c.mean_sigma_min, c.overflow_count
            )?;
            if let Some(b) = c.bound_value {
                write!(w, "{b:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Companion record: the configuration, library version and results.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "master_seed": self.config.master_seed,
            "config": self.config,
            "cells": self.cells,
            "fitted_slope": self.fitted_slope,
            "regime_label": self.regime_label,
        })
    }
}

/// Median of a sorted slice (midpoint for even lengths).
pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Nearest-rank `level` quantile of a sorted slice.
pub fn quantile_sorted(v: &[f64], level: f64) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    v[rank - 1]
}

/// Trial seed for `(cell, trial)` under `master_seed`.
pub fn trial_stream(master_seed: u64, cell: usize, trial: usize) -> RngStream {
    RngStream::new(master_seed, ((cell as u64) << 32) | trial as u64)
}

/// `(error, σ_min)` of `trials` independent simulate-and-fit runs at horizon
/// `T`; `None` marks an overflowed trajectory.
fn run_cell(sys: &LinearSystem, horizon: usize, trials: usize, master_seed: u64, cell: usize) -> Result<Vec<Option<(f64, f64)>>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_stream(master_seed, cell, i);
            let traj = simulate(sys, horizon, &mut rng, None)?;
            if traj.overflowed {
                return Ok(None);
            }
            let fit = ols_fit_trajectory(&traj, Some(sys))?;
            Ok(Some((fit.op_error.unwrap_or(f64::NAN), fit.sigma_min_x)))
        })
        .collect()
}

/// Explicit-constant bound at horizon `T`, when its precondition holds.
fn bound_at(sys: &LinearSystem, horizon: usize, delta: f64) -> Option<f64> {
    let gs = gramian_series(sys, horizon).ok()?;
    let cert = lds_cert(sys, &gs, horizon, delta).ok()?;
    let d = sys.dim();
    main_theorem_bound(&cert, horizon, d, d, sys.sigma(), delta)
        .ok()?
        .value
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let a = cfg.system_spec.build()?;
    let sys = LinearSystem::new(a, cfg.sigma * cfg.sigma)?;
    let mut cells = Vec::with_capacity(cfg.t_grid.len());
    for (ci, &horizon) in cfg.t_grid.iter().enumerate() {
        let outcomes = run_cell(&sys, horizon, cfg.trials, cfg.master_seed, ci)?;
        let overflow_count = outcomes.iter().filter(|o| o.is_none()).count();
        let kept: Vec<(f64, f64)> = outcomes.into_iter().flatten().collect();
        let mut errors: Vec<f64> = kept.iter().map(|o| o.0).collect();
        errors.sort_by(f64::total_cmp);
        let mean_sigma_min = if kept.is_empty() {
            f64::NAN
        } else {
            kept.iter().map(|o| o.1).sum::<f64>() / kept.len() as f64
        };
        let bound_value = bound_at(&sys, horizon, cfg.delta);
        let failure_count = bound_value.map(|b| errors.iter().filter(|&&e| e > b).count());
        cells.push(CellRecord {
            horizon,
            trials: cfg.trials,
            median_error: median_sorted(&errors),
            quantile_error: quantile_sorted(&errors, 1.0 - cfg.delta),
            mean_sigma_min,
            overflow_count,
            failure_count,
            bound_value,
            errors,
        });
    }
    let t_max = *cfg.t_grid.last().expect("validated nonempty");
    let mut result = SweepResult {
        config: cfg.clone(),
        cells,
        fitted_slope: None,
        regime_label: cfg.system_spec.regime_label(t_max, cfg.delta).to_string(),
    };
    result.fitted_slope = fit_loglog_slope(&result).ok();
    Ok(result)
}

/// Ordinary least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 3 || x.len() != y.len() || y.iter().chain(x).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateGrid);
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateGrid);
    }
    Ok(sxy / sxx)
}

/// Median of a with-replacement resample of `v`.
fn resampled_median(v: &[f64], rng: &mut RngStream, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend((0..v.len()).map(|_| v[rng.next_below(v.len() as u64) as usize]));
    scratch.sort_unstable_by(f64::total_cmp);
    median_sorted(scratch)
}

/// 2.5% and 97.5% percentiles of `stats`.
fn percentile_interval(mut stats: Vec<f64>) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    (quantile_sorted(&stats, 0.025), quantile_sorted(&stats, 0.975))
}

/// Slope of log median error against log T, with a 95% bootstrap
/// half-width from resampling trials within each cell.
pub fn fit_loglog_slope(result: &SweepResult) -> Result<(f64, f64)> {
    let t: Vec<f64> = result.cells.iter().map(|c| c.horizon as f64).collect();
    let medians: Vec<f64> = result.cells.iter().map(|c| c.median_error).collect();
    let slope = loglog_slope(&t, &medians)?;
    if result.cells.iter().any(|c| c.errors.is_empty()) {
        return Err(Error::DegenerateGrid);
    }
    let base = RngStream::new(result.config.master_seed, u64::MAX);
    let slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = base.substream(b);
            let mut scratch = Vec::new();
            let m: Vec<f64> = result
                .cells
                .iter()
                .map(|c| resampled_median(&c.errors, &mut rng, &mut scratch))
                .collect();
            loglog_slope(&t, &m).unwrap_or(f64::NAN)
        })
        .collect();
    let (lo, hi) = percentile_interval(slopes);
    Ok((slope, 0.5 * (hi - lo)))
}

/// 95% bootstrap interval for the median of `samples`.
pub fn bootstrap_median_ci(samples: &[f64], resamples: usize, rng: &RngStream) -> (f64, f64) {
    let meds: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.substream(b);
            resampled_median(samples, &mut r, &mut Vec::new())
        })
        .collect();
    percentile_interval(meds)
}

/// One row of the scalar regime table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub a: f64,
    pub median_error: f64,
    pub quantile_error: f64,
    pub predicted_scale: f64,
    pub regime: Regime,
    pub overflow_count: usize,
}

/// Empirical `1 − δ` error quantile of scalar OLS at horizon `T` for each
/// `a`, with the predicted order and regime (`c` sets the stable boundary
/// `1 − c log(1/δ)/T`).
pub fn regime_report(
    a_grid: &[f64],
    horizon: usize,
    trials: usize,
    delta: f64,
    c: f64,
    master_seed: u64,
) -> Result<Vec<RegimeRow>> {
    if a_grid.iter().any(|a| !(0.0..=1.5).contains(a)) {
        return Err(Error::InvalidArgument("a_grid must lie within [0, 1.5]".into()));
    }
    if horizon == 0 || trials == 0 || !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(
            "need T >= 1, trials >= 1 and delta in (0, 1/2)".into(),
        ));
    }
    a_grid
        .iter()
        .enumerate()
        .map(|(ci, &a)| {
            let sys = LinearSystem::scalar(a, 1.0)?;
            let outcomes = run_cell(&sys, horizon, trials, master_seed, ci)?;
            let overflow_count = outcomes.iter().filter(|o| o.is_none()).count();
            let mut errors: Vec<f64> = outcomes.into_iter().flatten().map(|o| o.0).collect();
            errors.sort_by(f64::total_cmp);
            let (regime, predicted_scale) = scalar_rate(a, horizon, delta, c);
            Ok(RegimeRow {
                a,
                median_error: median_sorted(&errors),
                quantile_error: quantile_sorted(&errors, 1.0 - delta),
                predicted_scale,
                regime,
                overflow_count,
            })
        })
        .collect()
}
