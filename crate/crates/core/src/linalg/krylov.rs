use faer::Mat;
use num_complex::Complex64 as C64;

use super::expm_dense;
use crate::error::{Error, Result};
use crate::operator::{OperatorSum, StateVector};

/// Settings for [`expm_multiply_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Error budget relative to the norm of the propagated vector, spread
    /// uniformly over the time interval.
    pub tol: f64,
    /// Maximum Krylov subspace dimension per restart.
    pub max_dim: usize,
    /// Maximum number of consecutive step halvings before giving up.
    pub max_halvings: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_dim: 30,
            max_halvings: 60,
        }
    }
}

/// `e^{−i t H} v` for a general (possibly non-Hermitian) `H`, matrix-free.
pub fn expm_multiply(op: &OperatorSum, v: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
    expm_multiply_with(
        op,
        v,
        t,
        &KrylovOptions {
            tol,
            ..KrylovOptions::default()
        },
    )
}

struct Arnoldi {
    basis: Vec<Vec<C64>>,
    /// Leading `k × k` block of the Hessenberg matrix.
    hess: Mat<C64>,
    /// `h_{k+1,k}`; zero on an invariant subspace.
    next: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Full Arnoldi on `A = factor · H` started from `start / ‖start‖`, with a
/// second Gram–Schmidt pass for orthogonality.
fn arnoldi(op: &OperatorSum, factor: C64, start: &[C64], max_dim: usize, scale: f64) -> Arnoldi {
    let dim = start.len();
    let m = max_dim.min(dim).max(1);
    let beta = norm(start);
    let mut basis: Vec<Vec<C64>> = vec![start.iter().map(|x| x / beta).collect()];
    let mut h = Mat::<C64>::zeros(m + 1, m);
    let mut next = 0.0;
    let mut k = m;
    for j in 0..m {
        let mut w = vec![C64::new(0.0, 0.0); dim];
        op.apply_into(&basis[j], &mut w);
        for x in &mut w {
            *x *= factor;
        }
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[(i, j)] += c;
                for (wx, vx) in w.iter_mut().zip(v) {
                    *wx -= c * vx;
                }
            }
        }
        let hn = norm(&w);
        h[(j + 1, j)] = C64::new(hn, 0.0);
        if hn <= 1e-13 * scale {
            k = j + 1;
            next = 0.0;
            break;
        }
        next = hn;
        if j + 1 < m {
            basis.push(w.iter().map(|x| x / hn).collect());
        }
    }
    let hess = Mat::from_fn(k, k, |r, c| h[(r, c)]);
    basis.truncate(k);
    Arnoldi { basis, hess, next }
}

/// Coefficients `y ≈ β e^{τ H_k} e_1` and the a-posteriori error estimate
/// `β |h_{k+1,k}| τ |e_kᵀ φ₁(τ H_k) e_1|`.
fn krylov_step(arn: &Arnoldi, tau: f64, beta: f64) -> Result<(Vec<C64>, f64)> {
    let k = arn.hess.nrows();
    let aug = Mat::from_fn(k + 1, k + 1, |r, c| {
        if r < k && c < k {
            arn.hess[(r, c)] * tau
        } else if r == 0 && c == k {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let e = expm_dense(&aug)?;
    let y = (0..k).map(|r| e[(r, 0)] * beta).collect();
    let err = beta * arn.next * tau * e[(k - 1, k)].norm();
    Ok((y, err))
}

/// Like [`expm_multiply`] with explicit options.
///
/// The interval is covered by sub-steps; each restarts Arnoldi from the
/// current vector and halves the step until the error estimate fits the
/// step's share of the budget. An invariant Krylov subspace makes the step
/// exact.
pub fn expm_multiply_with(
    op: &OperatorSum,
    v: &StateVector,
    t: f64,
    opts: &KrylovOptions,
) -> Result<StateVector> {
    if v.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: v.dim(),
        });
    }
    if !(opts.tol > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "expm_multiply needs tol > 0 and finite t (tol = {}, t = {t})",
            opts.tol
        )));
    }
    if t == 0.0 || v.norm() == 0.0 || op.is_empty() {
        return Ok(v.clone());
    }
    let factor = C64::new(0.0, -t.signum());
    let total = t.abs();
    let scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let mut w = v.amplitudes().to_vec();
    let mut done = 0.0;
    let mut tau = total;
    while done < total {
        let beta = norm(&w);
        if beta == 0.0 {
            break;
        }
        let arn = arnoldi(op, factor, &w, opts.max_dim, scale);
        tau = tau.min(total - done);
        let mut halvings = 0;
        let (y, err, allowed) = loop {
            let (y, err) = krylov_step(&arn, tau, beta)?;
            let allowed = opts.tol * beta * tau / total;
            if err <= allowed {
                break (y, err, allowed);
            }
            halvings += 1;
            if halvings > opts.max_halvings {
                return Err(Error::KrylovNoConvergence {
                    residual: err / beta,
                    tol: opts.tol,
                });
            }
            tau *= 0.5;
        };
        let mut next = vec![C64::new(0.0, 0.0); w.len()];
        for (coef, basis) in y.iter().zip(&arn.basis) {
            for (n, b) in next.iter_mut().zip(basis) {
                *n += coef * b;
            }
        }
        w = next;
        // Guard against accumulated rounding leaving a sliver of time.
        if total - (done + tau) <= 1e-14 * total {
            done = total;
        } else {
            done += tau;
        }
        if err < allowed / 16.0 && halvings == 0 {
            tau *= 2.0;
        }
    }
    Ok(StateVector::new(w))
}
