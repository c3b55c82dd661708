//! Coherence of a qubit whose `|1⟩` branch sees a shifted environment.
//!
//! Starting from `(|0⟩ + |1⟩)/√2 ⊗ |G⟩`, the two qubit branches evolve
//! independently, `|φ₀(t)⟩ = e^{−iH t}|G⟩` and `|φ_δ(t)⟩ = e^{−i(H+V)t}|G⟩`.
//! The normalized reduced density matrix then has ℓ1 coherence
//!
//! ```text
//! C(t) = |⟨φ₀|φ_δ⟩| / ((‖φ₀‖² + ‖φ_δ‖²) / 2).
//! ```
//!
//! [`coherence_trace`] uses that reduction directly.
//! [`joint_evolution_coherence`] evolves the full qubit-plus-environment state
//! and traces out the environment, which makes it an independent check.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_dense, expm_multiply};
use crate::models::{build_coupling, ModelSpec};
use crate::operator::{OperatorSum, StateVector};
use crate::spectral::ground_state_auto;

/// Krylov error budget per propagation.
pub const KRYLOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    #[default]
    Krylov,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Method::Dense),
            "krylov" => Ok(Method::Krylov),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Krylov => "krylov",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CoherenceTrace {
    pub times: Vec<f64>,
    /// Reported coherence, clamped to `[0, 1]`.
    pub coherence: Vec<f64>,
    /// Coherence before clamping.
    pub raw_coherence: Vec<f64>,
    pub overlap: Vec<f64>,
    pub norm0_sq: Vec<f64>,
    pub normd_sq: Vec<f64>,
}

impl CoherenceTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a time point from branch overlap and squared norms.
    pub fn push(&mut self, t: f64, overlap: f64, norm0_sq: f64, normd_sq: f64) {
        let raw = overlap / (0.5 * (norm0_sq + normd_sq));
        self.times.push(t);
        self.raw_coherence.push(raw);
        self.coherence.push(raw.clamp(0.0, 1.0));
        self.overlap.push(overlap);
        self.norm0_sq.push(norm0_sq);
        self.normd_sq.push(normd_sq);
    }

    pub fn last_coherence(&self) -> Option<f64> {
        self.coherence.last().copied()
    }

    /// CSV with columns `t, C, overlap, norm0_sq, normd_sq`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,C,overlap,norm0_sq,normd_sq")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.times[i],
                self.coherence[i],
                self.overlap[i],
                self.norm0_sq[i],
                self.normd_sq[i]
            )?;
        }
        Ok(())
    }
}

/// Reduced density matrix of the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity(pub [[C64; 2]; 2]);

impl QubitDensity {
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Unit trace, Hermitian, positive semidefinite, all within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.0;
        let herm = (r[0][1] - r[1][0].conj()).norm() <= tol
            && r[0][0].im.abs() <= tol
            && r[1][1].im.abs() <= tol;
        let (a, d) = (r[0][0].re, r[1][1].re);
        let det = a * d - r[0][1].norm_sqr();
        let disc = ((a - d).powi(2) + 4.0 * r[0][1].norm_sqr()).sqrt();
        let min_eig = 0.5 * (a + d - disc);
        herm && (self.trace() - 1.0).norm() <= tol && min_eig >= -tol && det >= -tol
    }
}

/// `|ρ₀₁| + |ρ₁₀|`.
pub fn l1_coherence(rho: &QubitDensity) -> f64 {
    rho.0[0][1].norm() + rho.0[1][0].norm()
}

/// `‖V|G⟩‖`.
pub fn coupling_kernel_norm(v: &OperatorSum, g: &StateVector) -> Result<f64> {
    Ok(v.apply(g)?.norm())
}

fn check_times(times: &[f64]) -> Result<()> {
    match times.first() {
        Some(&0.0) => {}
        _ => {
            return Err(Error::InvalidParameter(
                "time grid must start at t = 0".into(),
            ))
        }
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "time grid must be finite and non-decreasing".into(),
        ));
    }
    Ok(())
}

/// Dense propagator `e^{−i dt H}`, recomputed only when `dt` changes.
struct DenseStepper {
    h: Mat<C64>,
    cached: Option<(f64, Mat<C64>)>,
}

impl DenseStepper {
    fn new(h: Mat<C64>) -> Self {
        Self { h, cached: None }
    }

    fn step(&mut self, v: &StateVector, dt: f64) -> Result<StateVector> {
        if dt == 0.0 {
            return Ok(v.clone());
        }
        let stale = self.cached.as_ref().map_or(true, |(c, _)| *c != dt);
        if stale {
            let a = Mat::from_fn(self.h.nrows(), self.h.ncols(), |i, j| {
                self.h[(i, j)] * C64::new(0.0, -dt)
            });
            self.cached = Some((dt, expm_dense(&a)?));
        }
        StateVector::mat_mul(&self.cached.as_ref().expect("just filled").1, v)
    }
}

/// Coherence from the two environment branches started in `g`.
///
/// Branches are propagated incrementally from one time point to the next.
pub fn coherence_trace(
    h_env: &OperatorSum,
    v: &OperatorSum,
    g: &StateVector,
    times: &[f64],
    method: Method,
) -> Result<CoherenceTrace> {
    check_times(times)?;
    if g.dim() != h_env.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_env.dim(),
            found: g.dim(),
        });
    }
    if (g.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial state must be unit norm, got {}",
            g.norm()
        )));
    }
    let h_delta = h_env.plus(v)?;
    let mut phi0 = g.clone();
    let mut phid = g.clone();
    let mut trace = CoherenceTrace::default();
    let record = |trace: &mut CoherenceTrace, t: f64, a: &StateVector, b: &StateVector| {
        trace.push(t, a.inner(b).norm(), a.norm_sqr(), b.norm_sqr());
    };
    record(&mut trace, 0.0, &phi0, &phid);
    match method {
        Method::Krylov => {
            for w in times.windows(2) {
                let dt = w[1] - w[0];
                phi0 = expm_multiply(h_env, &phi0, dt, KRYLOV_TOL)?;
                phid = expm_multiply(&h_delta, &phid, dt, KRYLOV_TOL)?;
                record(&mut trace, w[1], &phi0, &phid);
            }
        }
        Method::Dense => {
            let mut s0 = DenseStepper::new(h_env.to_dense()?);
            let mut sd = DenseStepper::new(h_delta.to_dense()?);
            for w in times.windows(2) {
                let dt = w[1] - w[0];
                phi0 = s0.step(&phi0, dt)?;
                phid = sd.step(&phid, dt)?;
                record(&mut trace, w[1], &phi0, &phid);
            }
        }
    }
    Ok(trace)
}

/// Ground state of the unshifted environment, then [`coherence_trace`].
pub fn coherence_for_spec(
    spec: &ModelSpec,
    times: &[f64],
    method: Method,
) -> Result<CoherenceTrace> {
    let h = spec.environment()?;
    let v = build_coupling(spec)?;
    let g = ground_state_auto(&h)?;
    coherence_trace(&h, &v, &g.vector, times, method)
}

/// Reduced qubit density matrix of a joint state laid out as `q · D + e`.
fn reduce(psi: &[C64], d: usize) -> QubitDensity {
    let (a, b) = psi.split_at(d);
    let dot = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(p, q)| p * q.conj()).sum() };
    let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
    let r00 = dot(a, a) / norm;
    let r01 = dot(a, b) / norm;
    let r11 = dot(b, b) / norm;
    QubitDensity([[r00, r01], [r01.conj(), r11]])
}

/// Brute-force coherence from the joint qubit ⊗ environment evolution.
///
/// The total Hamiltonian is `I ⊗ H + |1⟩⟨1| ⊗ V`, assembled densely. The
/// joint state is evolved, the environment traced out, and `C` read off the
/// normalized reduced density matrix. Overlap and branch norms are reported
/// in the same convention as [`coherence_trace`].
pub fn joint_evolution_coherence(spec: &ModelSpec, times: &[f64]) -> Result<CoherenceTrace> {
    check_times(times)?;
    let h = spec.environment()?;
    let v = build_coupling(spec)?;
    let g = ground_state_auto(&h)?;
    let d = h.dim();
    let cap = crate::operator::DEFAULT_DENSE_CAP;
    if 2 * d > cap {
        return Err(Error::DenseCapExceeded { dim: 2 * d, cap });
    }
    let hd = h.to_dense()?;
    let vd = v.to_dense()?;
    let total = Mat::from_fn(2 * d, 2 * d, |i, j| {
        let (qi, ei) = (i / d, i % d);
        let (qj, ej) = (j / d, j % d);
        if qi != qj {
            C64::new(0.0, 0.0)
        } else if qi == 0 {
            hd[(ei, ej)]
        } else {
            hd[(ei, ej)] + vd[(ei, ej)]
        }
    });
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = StateVector::new(
        g.vector
            .amplitudes()
            .iter()
            .chain(g.vector.amplitudes())
            .map(|x| x * s)
            .collect(),
    );
    let mut stepper = DenseStepper::new(total);
    let mut trace = CoherenceTrace::default();
    let mut t_prev = 0.0;
    for &t in times {
        psi = stepper.step(&psi, t - t_prev)?;
        t_prev = t;
        let amps = psi.amplitudes();
        let rho = reduce(amps, d);
        let (a, b) = amps.split_at(d);
        let n0: f64 = 2.0 * a.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let nd: f64 = 2.0 * b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let c = l1_coherence(&rho);
        trace.times.push(t);
        trace.raw_coherence.push(c);
        trace.coherence.push(c.clamp(0.0, 1.0));
        trace.overlap.push(c * 0.5 * (n0 + nd));
        trace.norm0_sq.push(n0);
        trace.normd_sq.push(nd);
    }
    Ok(trace)
}

/// The reduced density matrix at each time of [`joint_evolution_coherence`].
pub fn joint_evolution_density(spec: &ModelSpec, times: &[f64]) -> Result<Vec<QubitDensity>> {
    check_times(times)?;
    let h = spec.environment()?;
    let v = build_coupling(spec)?;
    let g = ground_state_auto(&h)?;
    let d = h.dim();
    let h1 = h.plus(&v)?.to_dense()?;
    let h0 = h.to_dense()?;
    let mut s0 = DenseStepper::new(h0);
    let mut s1 = DenseStepper::new(h1);
    let mut a = g.vector.clone();
    let mut b = g.vector.clone();
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in times {
        a = s0.step(&a, t - t_prev)?;
        b = s1.step(&b, t - t_prev)?;
        t_prev = t;
        let psi: Vec<C64> = a
            .amplitudes()
            .iter()
            .chain(b.amplitudes())
            .copied()
            .collect();
        out.push(reduce(&psi, d));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_ising_env;

    fn grid(t_max: f64, steps: usize) -> Vec<f64> {
        (0..=steps)
            .map(|i| t_max * i as f64 / steps as f64)
            .collect()
    }

    #[test]
    fn l1_examples() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let half = C64::new(0.5, 0.0);
        assert_eq!(l1_coherence(&QubitDensity([[one, z], [z, z]])), 0.0);
        assert_eq!(
            l1_coherence(&QubitDensity([[half, half], [half, half]])),
            1.0
        );
        let r = QubitDensity([[half, C64::new(0.0, 0.3)], [C64::new(0.0, -0.3), half]]);
        assert!((l1_coherence(&r) - 0.6).abs() < 1e-15);
        assert!(r.is_valid(1e-12));
    }

    #[test]
    fn empty_coupling_keeps_full_coherence() {
        let spec = ModelSpec::ising(4, 0.5, (1.0, 0.5), (0.0, 0.0));
        for m in [Method::Dense, Method::Krylov] {
            let tr = coherence_for_spec(&spec, &grid(2.0, 8), m).unwrap();
            assert!(tr.coherence.iter().all(|c| (c - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn first_point_is_one() {
        let spec = ModelSpec::ising(3, 0.5, (1.0, 0.5), (0.0, 0.1));
        let tr = coherence_for_spec(&spec, &grid(1.0, 4), Method::Krylov).unwrap();
        assert!((tr.coherence[0] - 1.0).abs() < 1e-10);
        assert!(tr.coherence[4] < 1.0);
    }

    #[test]
    fn grid_must_start_at_zero() {
        let spec = ModelSpec::ising(3, 0.5, (1.0, 0.5), (0.0, 0.1));
        assert!(coherence_for_spec(&spec, &[0.1, 0.2], Method::Dense).is_err());
        assert!(coherence_for_spec(&spec, &[0.0, 0.2, 0.1], Method::Dense).is_err());
    }

    #[test]
    fn joint_initial_density() {
        let spec = ModelSpec::ising(3, 0.5, (1.0, 0.5), (0.05, 0.05));
        let rho = joint_evolution_density(&spec, &[0.0]).unwrap()[0];
        for row in rho.0 {
            for x in row {
                assert!((x - C64::new(0.5, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_norm_on_exceptional_line() {
        let d = 0.1 / 2f64.sqrt();
        let spec = ModelSpec::ising(5, 0.5, (1.0, 1.0), (d, d));
        let h = build_ising_env(&spec).unwrap();
        let g = ground_state_auto(&h).unwrap();
        let v = build_coupling(&spec).unwrap();
        assert!(coupling_kernel_norm(&v, &g.vector).unwrap() <= 1e-10);
        let spec = ModelSpec::ising(5, 0.5, (1.0, 0.9), (0.1, 0.0));
        let h = build_ising_env(&spec).unwrap();
        let g = ground_state_auto(&h).unwrap();
        assert!(coupling_kernel_norm(&build_coupling(&spec).unwrap(), &g.vector).unwrap() > 1e-3);
    }

    #[test]
    fn csv_header() {
        let mut tr = CoherenceTrace::default();
        tr.push(0.0, 1.0, 1.0, 1.0);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,C,overlap,norm0_sq,normd_sq\n0,1,1,1,1\n"
        );
    }
}
