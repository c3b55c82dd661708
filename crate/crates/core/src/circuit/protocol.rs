//! Trotterized, postselected evolution of the two-site Ising environment.
//!
//! One step of `e^{−i dt H}` with `H = −J Z₀Z₁ − a_x(X₀+X₁) − i a_y(Y₀+Y₁)`
//! is split into the unitary `e^{i dt J Z₀Z₁} e^{i dt a_x(X₀+X₁)}` followed
//! by one non-unitary factor per site. Each non-unitary factor uses the
//! ancilla (qubit 2): the ancilla is rotated to `cos(π/4+d̃t)|0⟩ +
//! sin(π/4+d̃t)|1⟩` with `d̃t = a_y dt`, the site is rotated into the `Y`
//! basis by `R`, a CNOT copies it onto the ancilla, the ancilla is
//! postselected on `|0⟩`, and `R⁻¹` undoes the basis change. The retained
//! branch carries `(cos d̃t − sin d̃t)/√2` on `|+_y⟩` and
//! `(cos d̃t + sin d̃t)/√2` on `|−_y⟩`, i.e. the site operator
//! `(cos d̃t/√2)(I − tan d̃t · Y)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{run_exact, run_shots, synthesize_ug, Circuit, GateKind, TrajectoryStats};
use crate::dynamics::CoherenceTrace;
use crate::error::{Error, Result};
use crate::linalg::expm_dense;
use crate::models::{ModelKind, ModelSpec};
use crate::operator::StateVector;
use crate::spectral::ground_state_ising2_closed_form;

/// System qubits.
pub const SYSTEM: [usize; 2] = [0, 1];
/// The reused ancilla.
pub const ANCILLA: usize = 2;
const N_QUBITS: usize = 3;

/// Smallest step [`adaptive_schedule`] will try.
pub const MIN_DT: f64 = 1e-6;

/// Field components of the shifted two-site environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSiteParams {
    pub j: f64,
    pub a_x: f64,
    pub a_y: f64,
}

impl TwoSiteParams {
    /// Parameters of `H(h + δ)` for a two-site Ising spec.
    pub fn shifted(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind != ModelKind::Ising || spec.n != 2 {
            return Err(Error::InvalidParameter(format!(
                "circuit mode needs a two-site Ising model, got {} with N = {}",
                spec.kind, spec.n
            )));
        }
        Ok(Self {
            j: spec.j,
            a_x: spec.h.0 + spec.delta.0,
            a_y: spec.h.1 + spec.delta.1,
        })
    }

    /// `|a_y| ≥ |a_x|`: the shifted Hamiltonian is past its exceptional point.
    pub fn broken_phase(&self) -> bool {
        self.a_y.abs() >= self.a_x.abs()
    }
}

/// `e^{i dt J Z₀Z₁} e^{i dt a_x (X₀+X₁)}` on the two system qubits.
pub fn trotter_unitary_step(j: f64, a_x: f64, dt: f64) -> Circuit {
    let mut c = Circuit::new(2);
    for q in SYSTEM {
        c.push(GateKind::RX(-2.0 * a_x * dt), &[q])
            .expect("valid gate");
    }
    c.push(GateKind::RZZ(-2.0 * j * dt), &SYSTEM)
        .expect("valid gate");
    c
}

/// Ancilla-assisted factor for `e^{−d̃t Y}` on `site`, with compensation
/// `(cos d̃t/√2)⁻¹` recorded.
pub fn nonunitary_step(a_y: f64, dt: f64, site: usize) -> Result<Circuit> {
    let dtt = a_y * dt;
    if !dtt.is_finite() || dtt.abs() >= FRAC_PI_4 {
        return Err(Error::StepOutOfRange { dt_tilde: dtt });
    }
    if !SYSTEM.contains(&site) {
        return Err(Error::QubitOutOfRange {
            qubit: site,
            n_qubits: SYSTEM.len(),
        });
    }
    let mut c = Circuit::with_ancilla(N_QUBITS, ANCILLA)?;
    c.push(GateKind::RY(FRAC_PI_2 + 2.0 * dtt), &[ANCILLA])?;
    c.push(GateKind::R, &[site])?;
    c.push(GateKind::CNOT, &[site, ANCILLA])?;
    c.push(GateKind::MeasurePostselect0, &[ANCILLA])?;
    c.push(GateKind::RInverse, &[site])?;
    c.push_compensation(SQRT_2 / dtt.cos());
    Ok(c)
}

/// One full Trotter step on the three-qubit register.
pub fn trotter_step(p: &TwoSiteParams, dt: f64) -> Result<Circuit> {
    let mut c = trotter_unitary_step(p.j, p.a_x, dt).widened(N_QUBITS, Some(ANCILLA))?;
    for site in SYSTEM {
        c.append(&nonunitary_step(p.a_y, dt, site)?)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CircuitMode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Coherence estimated from the circuit, with the raw observables behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitCoherence {
    pub trace: CoherenceTrace,
    /// Probability that all postselections succeeded, per time point.
    pub acceptance: Vec<f64>,
    /// Probability of accepting and reading `|00⟩` after `U_G⁻¹`.
    pub p00: Vec<f64>,
    /// Product of compensation factors up to each time point.
    pub compensation: Vec<f64>,
    /// Shot statistics per time point; empty in exact mode.
    pub stats: Vec<TrajectoryStats>,
    /// The shifted Hamiltonian is in its broken phase, where the overlap
    /// identity behind the estimator no longer holds.
    pub broken_phase: bool,
}

fn register_state(system: &StateVector) -> StateVector {
    let mut v = vec![C64::new(0.0, 0.0); 1 << N_QUBITS];
    v[..system.dim()].copy_from_slice(system.amplitudes());
    StateVector::new(v)
}

fn system_part(register: &StateVector) -> StateVector {
    StateVector::new(register.amplitudes()[..4].to_vec())
}

/// Two-site coherence from the circuit protocol over the steps `schedule`.
///
/// The environment starts in the closed-form ground state, prepared by
/// `U_G`. After `n` steps, `U_G⁻¹` is applied and the `|00⟩` amplitude
/// `c₀'` read out: the overlap is `comp · |c₀'|` and the shifted branch norm
/// `comp² · Σ|c_j|²`, where `comp` is the product of compensation factors;
/// the unshifted branch keeps unit norm.
pub fn coherence_from_circuit(
    spec: &ModelSpec,
    schedule: &[f64],
    mode: CircuitMode,
) -> Result<CircuitCoherence> {
    let p = TwoSiteParams::shifted(spec)?;
    let xi = ground_state_ising2_closed_form(spec.j, spec.h.0, spec.h.1)?;
    let xi: [f64; 4] = std::array::from_fn(|i| xi[i].re);
    let ug = synthesize_ug(xi)?.widened(N_QUBITS, Some(ANCILLA))?;
    let ug_inv = ug.inverse()?;
    let start = StateVector::basis(1 << N_QUBITS, 0);

    let mut out = CircuitCoherence {
        trace: CoherenceTrace::default(),
        acceptance: Vec::new(),
        p00: Vec::new(),
        compensation: Vec::new(),
        stats: Vec::new(),
        broken_phase: p.broken_phase(),
    };
    let record = |out: &mut CircuitCoherence, t: f64, comp: f64, p00: f64, pacc: f64| {
        out.trace
            .push(t, comp * p00.sqrt(), 1.0, comp * comp * pacc);
        out.acceptance.push(pacc);
        out.p00.push(p00);
        out.compensation.push(comp);
    };

    let steps: Vec<Circuit> = schedule
        .iter()
        .map(|&dt| trotter_step(&p, dt))
        .collect::<Result<_>>()?;
    let mut t = 0.0;
    let mut comp = 1.0;
    match mode {
        CircuitMode::Exact => {
            let mut state = run_exact(&ug, &start)?.0;
            for k in 0..=steps.len() {
                if k > 0 {
                    state = run_exact(&steps[k - 1], &state)?.0;
                    comp *= steps[k - 1].total_compensation();
                    t += schedule[k - 1];
                }
                let c = run_exact(&ug_inv, &state)?.0;
                record(&mut out, t, comp, c[0].norm_sqr(), c.norm_sqr());
            }
        }
        CircuitMode::Shots { shots, seed } => {
            let mut prefix = ug.clone();
            for k in 0..=steps.len() {
                if k > 0 {
                    prefix.append(&steps[k - 1])?;
                    comp *= steps[k - 1].total_compensation();
                    t += schedule[k - 1];
                }
                let mut full = prefix.clone();
                full.append(&ug_inv)?;
                let stats = run_shots(&full, &start, shots, seed.wrapping_add((k as u64) << 40))?;
                record(&mut out, t, comp, stats.frequency(0), stats.acceptance());
                out.stats.push(stats);
            }
        }
    }
    Ok(out)
}

/// Relative deviation of one compensated circuit step from the exact step.
fn step_deviation(
    p: &TwoSiteParams,
    h: &Mat<C64>,
    psi: &StateVector,
    dt: f64,
) -> Result<(f64, StateVector)> {
    let a = Mat::from_fn(4, 4, |i, j| h[(i, j)] * C64::new(0.0, -dt));
    let exact = StateVector::mat_mul(&expm_dense(&a)?, psi)?;
    let step = trotter_step(p, dt)?;
    let (out, _) = run_exact(&step, &register_state(psi))?;
    let circ = system_part(&out).scaled(C64::new(step.total_compensation(), 0.0));
    Ok((circ.distance(&exact) / psi.norm(), exact))
}

/// Greedy step sizes covering `[0, t_max]`.
///
/// Starting from `t_max/10`, a step is halved until the compensated circuit
/// step deviates from the exact step on the current state by less than
/// `tol` (relative to the state norm), and doubled after a step that
/// deviates by less than `tol/4`. The state advances with the exact step.
pub fn adaptive_schedule(spec: &ModelSpec, tol: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) || !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "adaptive schedule needs tol > 0 and t_max > 0 (tol = {tol}, t_max = {t_max})"
        )));
    }
    let p = TwoSiteParams::shifted(spec)?;
    let h = spec.shifted_environment()?.to_dense()?;
    let mut psi = ground_state_ising2_closed_form(spec.j, spec.h.0, spec.h.1)?;
    let mut t = 0.0;
    let mut dt = t_max / 10.0;
    let mut schedule = Vec::new();
    while t_max - t > 1e-12 * t_max {
        let mut trial = dt.min(t_max - t);
        let (dev, next) = loop {
            if trial < MIN_DT {
                return Err(Error::StepUnderflow {
                    time: t,
                    min_dt: MIN_DT,
                });
            }
            if (p.a_y * trial).abs() >= FRAC_PI_4 {
                trial *= 0.5;
                continue;
            }
            let (dev, next) = step_deviation(&p, &h, &psi, trial)?;
            if dev < tol {
                break (dev, next);
            }
            trial *= 0.5;
        };
        schedule.push(trial);
        t += trial;
        psi = next;
        dt = if dev < tol / 4.0 { trial * 2.0 } else { trial };
    }
    Ok(schedule)
}
