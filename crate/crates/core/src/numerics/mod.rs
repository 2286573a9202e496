//! Dense linear algebra and random sampling kernels.

mod eigen;
mod expm;
mod matrix;
mod quad;
mod rng;

pub use eigen::{
    inv_sqrt_spd, log_det_ratio, log_det_spd, min_singular_value, operator_norm,
    singular_extremes, spd_eigen, sym_eigen, sym_pinv, SymEigen,
};
pub use expm::matrix_exp;
pub use matrix::Matrix;
pub use quad::{adaptive_simpson, normal_cdf, normal_sf};
pub use rng::{gaussian_vector, uniform_in_ball, unit_vector, RngStream};

/// Random skew-symmetric matrix with i.i.d. `N(0, scale²)` upper entries.
pub fn random_skew(rng: &mut RngStream, d: usize, scale: f64) -> Matrix {
    let mut x = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = scale * rng.next_gaussian();
            x[(i, j)] = v;
            x[(j, i)] = -v;
        }
    }
    x
}

/// Random symmetric matrix with i.i.d. standard normal upper entries.
pub fn random_symmetric(rng: &mut RngStream, d: usize) -> Matrix {
    let mut x = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = rng.next_gaussian();
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

/// Random `rows×cols` matrix of standard normals.
pub fn random_gaussian_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
    let mut x = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            x[(i, j)] = rng.next_gaussian();
        }
    }
    x
}

/// Random orthogonal matrix `exp(K)` for a random skew `K`.
pub fn random_orthogonal(rng: &mut RngStream, d: usize) -> Matrix {
    matrix_exp(&random_skew(rng, d, 1.0))
}
