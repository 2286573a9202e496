//! Ordinary least squares on (possibly dependent) regression data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds::{LinearSystem, Trajectory};
use crate::numerics::{inv_sqrt_spd, operator_norm, spd_eigen, sym_eigen, Matrix};

/// Design `X` (rows `x_tᵀ`) and responses `Y` (rows `y_tᵀ`).
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub x: Matrix,
    pub y: Matrix,
}

impl Regression {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, responses have {}",
                x.rows(),
                y.rows()
            )));
        }
        Ok(Self { x, y })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub a_hat: Matrix,
    /// `‖Â − A‖_op` when the ground truth is known.
    pub op_error: Option<f64>,
    pub sigma_min_x: f64,
    pub rank_deficient: bool,
}

/// `Â = (X†Y)ᵀ` from the Gram matrix `XᵀX` and cross moment `XᵀY`.
fn fit_from_moments(gram: &Matrix, cross: &Matrix) -> Result<EstimateReport> {
    let eig = sym_eigen(gram)?;
    let p = gram.rows() as f64;
    let cutoff = 10.0 * p * f64::EPSILON * eig.max().max(0.0);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    let pinv = eig.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    let a_hat = pinv.matmul(cross).transpose();
    Ok(EstimateReport {
        a_hat,
        op_error: None,
        sigma_min_x: eig.min().max(0.0).sqrt(),
        rank_deficient: rank < gram.rows(),
    })
}

/// `argmin_A Σ ½‖y_t − A x_t‖²`; the minimum-norm solution when `XᵀX` is
/// singular.
pub fn ols_fit(reg: &Regression) -> Result<EstimateReport> {
    let gram = reg.x.gram();
    let cross = reg.x.transpose().matmul(&reg.y);
    fit_from_moments(&gram, &cross)
}

/// Regresses `X_{t+1}` on `X_t` (stacked with `u_t` when inputs are present).
///
/// A zero initial state contributes a zero regressor row, which leaves the
/// normal equations unchanged, so all `T` transitions are accumulated. With
/// inputs the estimate is `[Â B̂]` and the error is measured against `[A B]`.
pub fn ols_fit_trajectory(traj: &Trajectory, truth: Option<&LinearSystem>) -> Result<EstimateReport> {
    if traj.overflowed {
        return Err(Error::OverflowedTrajectory);
    }
    let d = traj.dim;
    let p = d + traj.inputs.as_ref().map_or(0, |_| traj.input_dim);
    let mut gram = vec![0.0; p * p];
    let mut cross = vec![0.0; p * d];
    let mut z = vec![0.0; p];
    for t in 0..traj.horizon() {
        z[..d].copy_from_slice(traj.state(t));
        if let Some(u) = traj.input(t) {
            z[d..].copy_from_slice(u);
        }
        let y = traj.state(t + 1);
        for i in 0..p {
            let zi = z[i];
            if zi == 0.0 {
                continue;
            }
            for j in i..p {
                gram[i * p + j] += zi * z[j];
            }
            for (c, &yj) in cross[i * d..(i + 1) * d].iter_mut().zip(y) {
                *c += zi * yj;
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[i * p + j] = gram[j * p + i];
        }
    }
    let mut report = fit_from_moments(&Matrix::new(p, p, gram)?, &Matrix::new(p, d, cross)?)?;
    if let Some(sys) = truth {
        let target = sys.stacked_parameters();
        if target.shape() != report.a_hat.shape() {
            return Err(Error::DimensionMismatch(format!(
                "estimate is {:?}, truth is {:?}",
                report.a_hat.shape(),
                target.shape()
            )));
        }
        report.op_error = Some(operator_norm(&(&report.a_hat - &target)));
    }
    Ok(report)
}

/// OLS on responses whitened by `Σ^{-1/2}`, mapped back by `Σ^{1/2}`.
pub fn whitened_ols_fit(reg: &Regression, sigma: &Matrix) -> Result<EstimateReport> {
    if sigma.rows() != reg.y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "noise covariance is {}x{}, responses have {} columns",
            sigma.rows(),
            sigma.cols(),
            reg.y.cols()
        )));
    }
    let w = inv_sqrt_spd(sigma)?;
    let whitened = Regression::new(reg.x.clone(), reg.y.matmul(&w))?;
    let mut report = ols_fit(&whitened)?;
    let root = spd_eigen(sigma)?.map(f64::sqrt);
    report.a_hat = root.matmul(&report.a_hat);
    Ok(report)
}

/// `(tr((XᵀX)^{-1}), n / λ_min(XᵀX))`, lower bounds on `E‖Â − A‖²_op` under
/// unit-variance Gaussian noise with `n`-dimensional responses.
pub fn fixed_design_error_floor(x: &Matrix, n: usize) -> Result<(f64, f64)> {
    let eig = sym_eigen(&x.gram())?;
    let cutoff = 10.0 * x.cols() as f64 * f64::EPSILON * eig.max().max(0.0);
    if eig.min() <= cutoff {
        return Err(Error::SingularDesign);
    }
    let trace = eig.eigenvalues.iter().map(|l| 1.0 / l).sum();
    Ok((trace, n as f64 / eig.min()))
}
