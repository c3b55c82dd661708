//! Dense and matrix-free linear algebra over complex numbers.
//!
//! None of the routines here assume Hermiticity: the Hamiltonians of interest
//! carry imaginary fields, so symmetric shortcuts (Lanczos, Hermitian
//! eigensolvers) are not valid in general.

mod eig;
mod expm;
mod krylov;

pub use eig::{eig_general, SpectralResult, NEAR_DEGENERATE_GAP};
pub use expm::expm_dense;
pub use krylov::{expm_multiply, expm_multiply_with, KrylovOptions};

use faer::Mat;
use num_complex::Complex64 as C64;

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &Mat<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.col(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute entry of `a − b`.
pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut d = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

/// Conjugate transpose as an owned matrix.
pub fn adjoint(m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// `c · m`.
pub fn scale(m: &Mat<C64>, c: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

pub(crate) fn all_finite(m: &Mat<C64>) -> bool {
    (0..m.ncols()).all(|j| {
        m.col(j)
            .iter()
            .all(|x| x.re.is_finite() && x.im.is_finite())
    })
}
