use super::Matrix;

const TAYLOR_DEGREE: usize = 18;

/// Matrix exponential by scaling and squaring.
///
/// `X` is scaled by `2^{-s}` with `s = max(0, ⌈log₂‖X‖₁⌉ + 1)`, a degree-18
/// Taylor polynomial is evaluated by Horner's rule and the result squared `s`
/// times.
pub fn matrix_exp(x: &Matrix) -> Matrix {
    assert!(x.is_square(), "matrix_exp needs a square matrix");
    let n = x.rows();
    let norm = x.norm_1();
    let s = if norm > 0.0 {
        (norm.log2().ceil() as i64 + 1).max(0) as u32
    } else {
        0
    };
    let scaled = x.scale((-(s as f64)).exp2());

    let id = Matrix::identity(n);
    let mut acc = id.clone();
    for j in (1..=TAYLOR_DEGREE).rev() {
        acc = &id + &scaled.matmul(&acc).scale(1.0 / j as f64);
    }
    for _ in 0..s {
        acc = acc.matmul(&acc);
    }
    acc
}
