use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::{all_finite, norm1};
use crate::error::{Error, Result};

// Scaling-and-squaring with diagonal Padé approximants (Higham 2005). The
// backward error bounds behind the θ thresholds hold for arbitrary square
// complex matrices, normal or not.
#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential `exp(m)` of a general complex square matrix.
pub fn expm_dense(m: &Mat<C64>) -> Result<Mat<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let a_norm = norm1(m);
    for &(order, theta) in &THETA {
        if a_norm <= theta {
            let coeffs: &[f64] = match order {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(m, coeffs);
        }
    }
    let s = if a_norm > THETA_13 {
        (a_norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = Mat::from_fn(n, n, |i, j| m[(i, j)] * 0.5f64.powi(s));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !all_finite(&r) {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

fn axpy_identity(m: &mut Mat<C64>, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(c, 0.0);
    }
}

fn lin_comb(terms: &[(f64, &Mat<C64>)], n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| {
        terms.iter().map(|(c, m)| m[(i, j)] * *c).sum::<C64>()
    })
}

fn solve_pade(u: &Mat<C64>, v: &Mat<C64>) -> Result<Mat<C64>> {
    let p = v + u;
    let q = v - u;
    let r = q.partial_piv_lu().solve(&p);
    if !all_finite(&r) {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

fn pade_low(a: &Mat<C64>, b: &[f64]) -> Result<Mat<C64>> {
    let n = a.nrows();
    let a2 = a * a;
    // powers A^0, A^2, A^4, ...
    let mut even_pows: Vec<Mat<C64>> = vec![Mat::identity(n, n), a2.clone()];
    while even_pows.len() < b.len() / 2 {
        let next = even_pows.last().unwrap() * &a2;
        even_pows.push(next);
    }
    let mut u_inner = Mat::<C64>::zeros(n, n);
    let mut v = Mat::<C64>::zeros(n, n);
    for (k, p) in even_pows.iter().enumerate() {
        u_inner = lin_comb(&[(1.0, &u_inner), (b[2 * k + 1], p)], n);
        v = lin_comb(&[(1.0, &v), (b[2 * k], p)], n);
    }
    let u = a * &u_inner;
    solve_pade(&u, &v)
}

fn pade13(a: &Mat<C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let mut u = &a6 * &inner_u;
    u = lin_comb(&[(1.0, &u), (b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
    axpy_identity(&mut u, b[1]);
    let u = a * &u;
    let inner_v = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let mut v = &a6 * &inner_v;
    v = lin_comb(&[(1.0, &v), (b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
    axpy_identity(&mut v, b[0]);
    solve_pade(&u, &v)
}
