use faer::Mat;
use num_complex::Complex64 as C64;

use super::{all_finite, norm1};
use crate::error::{Error, Result};
use crate::operator::StateVector;

/// Eigenvalue separation below which an eigenpair is flagged as close to a
/// defective (exceptional-point) coalescence.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-6;

const RESIDUAL_TOL: f64 = 1e-9;

/// Eigenvalues and unit-norm right eigenvectors of a general complex matrix.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<C64>,
    pub right_eigenvectors: Vec<StateVector>,
    /// `true` when another eigenvalue lies within [`NEAR_DEGENERATE_GAP`];
    /// the corresponding eigenvector may be ill-conditioned.
    pub condition_flags: Vec<bool>,
    /// `‖M v − λ v‖` for each pair.
    pub residuals: Vec<f64>,
    /// The 1-norm of the decomposed matrix.
    pub matrix_norm: f64,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.im.abs())
            .fold(0.0, f64::max)
    }
}

/// Full eigendecomposition of a dense non-Hermitian matrix.
///
/// Fails if the backend does not converge or any returned pair has residual
/// above `1e-9 · ‖M‖₁`.
pub fn eig_general(m: &Mat<C64>) -> Result<SpectralResult> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let evd = m
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let eigenvalues: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let mut right_eigenvectors = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<C64> = u.col(j).iter().copied().collect();
        right_eigenvectors.push(StateVector::new(col).normalized());
    }
    let matrix_norm = norm1(m);
    let mut residuals = Vec::with_capacity(n);
    for (lambda, v) in eigenvalues.iter().zip(&right_eigenvectors) {
        let mv = StateVector::mat_mul(m, v)?;
        let r = mv.distance(&v.scaled(*lambda));
        residuals.push(r);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > RESIDUAL_TOL * matrix_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Eigensolver(format!(
            "eigenpair residual {worst:.3e} exceeds {RESIDUAL_TOL:e}·‖M‖ = {:.3e}",
            RESIDUAL_TOL * matrix_norm
        )));
    }
    let condition_flags = (0..n)
        .map(|i| {
            (0..n).any(|j| j != i && (eigenvalues[i] - eigenvalues[j]).norm() < NEAR_DEGENERATE_GAP)
        })
        .collect();
    Ok(SpectralResult {
        eigenvalues,
        right_eigenvectors,
        condition_flags,
        residuals,
        matrix_norm,
    })
}
