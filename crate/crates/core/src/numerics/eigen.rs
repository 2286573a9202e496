use crate::error::{Error, Result};

use super::Matrix;

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigendecomposition `A = Q diag(λ) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, `eigenvectors[:, i]` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `Q diag(f(λ)) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[(i, k)] * fl[k] * q[(j, k)]).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map(|l| l)
    }
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let asymmetry = a.asymmetry();
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { asymmetry });
    }
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let tol = 1e-14 * a.frobenius_norm();

    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..i {
                s += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= tol;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off(&m) <= tol;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest singular value `√λ_max(AᵀA)`.
pub fn operator_norm(a: &Matrix) -> f64 {
    singular_extremes(a).1
}

/// Smallest singular value `√max(λ_min(AᵀA), 0)`. Zero when `cols > rows`.
pub fn min_singular_value(a: &Matrix) -> f64 {
    singular_extremes(a).0
}

/// `(σ_min, σ_max)` from the Gram matrix.
pub fn singular_extremes(a: &Matrix) -> (f64, f64) {
    // Use the smaller Gram so the eigensolve stays d×d for tall data matrices.
    let (g, rank_short) = if a.rows() >= a.cols() {
        (a.gram(), false)
    } else {
        (a.transpose().gram(), true)
    };
    let eig = sym_eigen(&g).expect("Gram matrices are symmetric and Jacobi converges on them");
    let smax = eig.max().max(0.0).sqrt();
    let smin = if rank_short { 0.0 } else { eig.min().max(0.0).sqrt() };
    (smin, smax)
}

/// Checks symmetric positive definiteness and returns the eigendecomposition.
pub fn spd_eigen(a: &Matrix) -> Result<SymEigen> {
    let eig = sym_eigen(a)?;
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(eig)
}

/// `log det A` for symmetric positive definite `A`.
pub fn log_det_spd(a: &Matrix) -> Result<f64> {
    Ok(spd_eigen(a)?.eigenvalues.iter().map(|l| l.ln()).sum())
}

/// `log det Ga − log det Gb`, each from eigenvalues.
pub fn log_det_ratio(ga: &Matrix, gb: &Matrix) -> Result<f64> {
    if ga.shape() != gb.shape() {
        return Err(Error::DimensionMismatch(format!(
            "log-det ratio of {:?} and {:?}",
            ga.shape(),
            gb.shape()
        )));
    }
    Ok(log_det_spd(ga)? - log_det_spd(gb)?)
}

/// Moore–Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
///
/// Eigenvalues at or below `n·ε·λ_max` (scaled by 10 for headroom) are
/// treated as zero. Returns the inverse and the numerical rank.
pub fn sym_pinv(g: &Matrix) -> Result<(Matrix, usize)> {
    let eig = sym_eigen(g)?;
    let n = g.rows() as f64;
    let cutoff = 10.0 * n * f64::EPSILON * eig.max().max(0.0);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    let inv = eig.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    Ok((inv, rank))
}

/// `A^{-1/2}` for symmetric positive definite `A`.
pub fn inv_sqrt_spd(a: &Matrix) -> Result<Matrix> {
    Ok(spd_eigen(a)?.map(|l| 1.0 / l.sqrt()))
}
