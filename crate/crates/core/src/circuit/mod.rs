//! Gate-level emulation of the postselected two-site protocol.
//!
//! Circuits act on system qubits plus one reusable ancilla. A
//! [`GateKind::MeasurePostselect0`] projects the ancilla onto `|0⟩`; in
//! [`run_exact`] the projection is applied without renormalization, so the
//! squared norm of the output is the probability that every postselection
//! succeeded. [`run_shots`] samples the same measurements trajectory by
//! trajectory.

mod protocol;
mod synthesis;

pub use protocol::{
    adaptive_schedule, coherence_from_circuit, nonunitary_step, trotter_step, trotter_unitary_step,
    CircuitCoherence, CircuitMode, TwoSiteParams, ANCILLA, MIN_DT, SYSTEM,
};
pub use synthesis::{synthesize_ug, synthesize_ug_state, ug_angles, UgAngles};

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::StateVector;

/// Branches whose probability falls below this are treated as lost.
pub const VANISHING_PROBABILITY: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    /// `e^{−iθY/2}`.
    RY(f64),
    /// `e^{−iθX/2}`.
    RX(f64),
    /// `e^{−iθ Z⊗Z/2}`.
    RZZ(f64),
    CZ,
    /// Targets are `[control, target]`.
    CNOT,
    /// `(e^{iπ/4} I + e^{−iπ/4}(X + Y + Z))/2`, sending `|±_y⟩` to `|0⟩, |1⟩`.
    R,
    RInverse,
    MeasurePostselect0,
}

impl GateKind {
    fn arity(self) -> usize {
        match self {
            GateKind::RZZ(_) | GateKind::CZ | GateKind::CNOT => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            GateKind::RY(_) => "RY",
            GateKind::RX(_) => "RX",
            GateKind::RZZ(_) => "RZZ",
            GateKind::CZ => "CZ",
            GateKind::CNOT => "CNOT",
            GateKind::R => "R",
            GateKind::RInverse => "R_inv",
            GateKind::MeasurePostselect0 => "POSTSELECT0",
        }
    }

    fn angle(self) -> Option<f64> {
        match self {
            GateKind::RY(t) | GateKind::RX(t) | GateKind::RZZ(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_unitary(self) -> bool {
        self != GateKind::MeasurePostselect0
    }

    /// Inverse of a unitary gate.
    pub fn inverse(self) -> Option<GateKind> {
        Some(match self {
            GateKind::RY(t) => GateKind::RY(-t),
            GateKind::RX(t) => GateKind::RX(-t),
            GateKind::RZZ(t) => GateKind::RZZ(-t),
            GateKind::CZ => GateKind::CZ,
            GateKind::CNOT => GateKind::CNOT,
            GateKind::R => GateKind::RInverse,
            GateKind::RInverse => GateKind::R,
            GateKind::MeasurePostselect0 => return None,
        })
    }

    /// Single-qubit matrix of a one-target unitary gate.
    pub fn matrix_1q(self) -> Option<[[C64; 2]; 2]> {
        let c = |re: f64, im: f64| C64::new(re, im);
        Some(match self {
            GateKind::RY(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateKind::RX(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            GateKind::R | GateKind::RInverse => {
                let p = C64::from_polar(0.5, FRAC_PI_4);
                let m = C64::from_polar(0.5, -FRAC_PI_4);
                let i = c(0.0, 1.0);
                // I, X, Y, Z contributions
                let r = [
                    [p + m, m * (c(1.0, 0.0) - i)],
                    [m * (c(1.0, 0.0) + i), p - m],
                ];
                if self == GateKind::R {
                    r
                } else {
                    [
                        [r[0][0].conj(), r[1][0].conj()],
                        [r[0][1].conj(), r[1][1].conj()],
                    ]
                }
            }
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[usize]) -> Self {
        Self {
            kind,
            targets: targets.to_vec(),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        match self.kind.angle() {
            Some(a) => write!(f, " {a}")?,
            None => write!(f, " -")?,
        }
        for t in &self.targets {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

/// An ordered gate list with optional ancilla and amplitude compensation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ancilla: Option<usize>,
    gates: Vec<Gate>,
    /// Scalars whose product restores target amplitudes from postselected
    /// ones; one entry per non-unitary site factor.
    compensation: Vec<f64>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ancilla: None,
            gates: Vec::new(),
            compensation: Vec::new(),
        }
    }

    pub fn with_ancilla(n_qubits: usize, ancilla: usize) -> Result<Self> {
        if ancilla >= n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit: ancilla,
                n_qubits,
            });
        }
        Ok(Self {
            ancilla: Some(ancilla),
            ..Self::new(n_qubits)
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ancilla(&self) -> Option<usize> {
        self.ancilla
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn compensation(&self) -> &[f64] {
        &self.compensation
    }

    /// Product of all compensation factors.
    pub fn total_compensation(&self) -> f64 {
        self.compensation.iter().product()
    }

    pub fn is_unitary(&self) -> bool {
        self.gates.iter().all(|g| g.kind.is_unitary())
    }

    pub fn push(&mut self, kind: GateKind, targets: &[usize]) -> Result<()> {
        if targets.len() != kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} target(s), got {}",
                kind.name(),
                kind.arity(),
                targets.len()
            )));
        }
        for &q in targets {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::InvalidParameter(format!(
                "{} needs two distinct qubits",
                kind.name()
            )));
        }
        if kind == GateKind::MeasurePostselect0 && self.ancilla != Some(targets[0]) {
            return Err(Error::InvalidParameter(format!(
                "postselection on qubit {} which is not the ancilla",
                targets[0]
            )));
        }
        self.gates.push(Gate::new(kind, targets));
        Ok(())
    }

    pub fn push_compensation(&mut self, factor: f64) {
        self.compensation.push(factor);
    }

    /// Appends `other`, which must fit in this register and use the same
    /// ancilla if it measures.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        for g in &other.gates {
            self.push(g.kind, &g.targets)?;
        }
        self.compensation.extend_from_slice(&other.compensation);
        Ok(())
    }

    /// Reversed circuit of inverted gates; fails on measurements.
    pub fn inverse(&self) -> Result<Circuit> {
        let mut out = Circuit {
            n_qubits: self.n_qubits,
            ancilla: self.ancilla,
            gates: Vec::with_capacity(self.gates.len()),
            compensation: Vec::new(),
        };
        for g in self.gates.iter().rev() {
            let kind = g.kind.inverse().ok_or_else(|| {
                Error::InvalidParameter("a postselecting circuit has no inverse".into())
            })?;
            out.gates.push(Gate::new(kind, &g.targets));
        }
        Ok(out)
    }

    /// The same gates on a wider register.
    pub fn widened(&self, n_qubits: usize, ancilla: Option<usize>) -> Result<Circuit> {
        let mut out = match ancilla {
            Some(a) => Circuit::with_ancilla(n_qubits, a)?,
            None => Circuit::new(n_qubits),
        };
        out.append(self)?;
        Ok(out)
    }

    /// Dense matrix of a unitary circuit.
    pub fn dense_unitary(&self) -> Result<Mat<C64>> {
        if !self.is_unitary() {
            return Err(Error::InvalidParameter(
                "circuit contains postselection".into(),
            ));
        }
        let dim = 1usize << self.n_qubits;
        let mut m = Mat::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let mut v = StateVector::basis(dim, k).into_inner();
            for g in &self.gates {
                apply_gate(&mut v, g);
            }
            for (i, x) in v.into_iter().enumerate() {
                m[(i, k)] = x;
            }
        }
        Ok(m)
    }

    /// Dense matrix of the postselected branch: every measurement replaced by
    /// the projector onto ancilla `|0⟩`, compensation not applied.
    pub fn dense_postselected(&self) -> Result<Mat<C64>> {
        let dim = 1usize << self.n_qubits;
        let mut m = Mat::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let mut v = StateVector::basis(dim, k).into_inner();
            for g in &self.gates {
                if g.kind == GateKind::MeasurePostselect0 {
                    project_zero(&mut v, g.targets[0]);
                } else {
                    apply_gate(&mut v, g);
                }
            }
            for (i, x) in v.into_iter().enumerate() {
                m[(i, k)] = x;
            }
        }
        Ok(m)
    }

    /// One gate per line: kind, angle (or `-`), targets.
    pub fn gate_list(&self) -> String {
        let mut s = String::new();
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.gate_list())
    }
}

fn apply_1q(v: &mut [C64], q: usize, m: &[[C64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..v.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (a, b) = (v[i], v[j]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_gate(v: &mut [C64], g: &Gate) {
    match g.kind {
        GateKind::CZ => {
            let mask = (1usize << g.targets[0]) | (1usize << g.targets[1]);
            for (i, x) in v.iter_mut().enumerate() {
                if i & mask == mask {
                    *x = -*x;
                }
            }
        }
        GateKind::CNOT => {
            let c = 1usize << g.targets[0];
            let t = 1usize << g.targets[1];
            for i in 0..v.len() {
                if i & c != 0 && i & t == 0 {
                    v.swap(i, i | t);
                }
            }
        }
        GateKind::RZZ(theta) => {
            let (a, b) = (g.targets[0], g.targets[1]);
            let same = C64::from_polar(1.0, -theta / 2.0);
            let diff = same.conj();
            for (i, x) in v.iter_mut().enumerate() {
                let parity = ((i >> a) ^ (i >> b)) & 1;
                *x *= if parity == 0 { same } else { diff };
            }
        }
        GateKind::MeasurePostselect0 => unreachable!("measurements are handled by the runner"),
        kind => {
            let m = kind.matrix_1q().expect("one-qubit unitary");
            apply_1q(v, g.targets[0], &m);
        }
    }
}

/// Zeroes every amplitude with qubit `q` in `|1⟩`; returns the kept weight.
fn project_zero(v: &mut [C64], q: usize) -> f64 {
    let bit = 1usize << q;
    let mut kept = 0.0;
    for (i, x) in v.iter_mut().enumerate() {
        if i & bit != 0 {
            *x = C64::new(0.0, 0.0);
        } else {
            kept += x.norm_sqr();
        }
    }
    kept
}

fn check_input(c: &Circuit, input: &StateVector) -> Result<()> {
    let dim = 1usize << c.n_qubits;
    if input.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: input.dim(),
        });
    }
    Ok(())
}

/// Deterministic amplitude run.
///
/// Returns the postselected branch and the cumulative probability that all
/// postselections succeeded, `‖out‖² / ‖input‖²`.
pub fn run_exact(c: &Circuit, input: &StateVector) -> Result<(StateVector, f64)> {
    check_input(c, input)?;
    let n0 = input.norm_sqr();
    if n0 == 0.0 {
        return Err(Error::VanishingBranch { probability: 0.0 });
    }
    let mut v = input.amplitudes().to_vec();
    for g in &c.gates {
        if g.kind == GateKind::MeasurePostselect0 {
            let kept = project_zero(&mut v, g.targets[0]) / n0;
            if kept < VANISHING_PROBABILITY {
                return Err(Error::VanishingBranch { probability: kept });
            }
        } else {
            apply_gate(&mut v, g);
        }
    }
    let out = StateVector::new(v);
    let p = out.norm_sqr() / n0;
    Ok((out, p))
}

/// Outcome of [`run_shots`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub shots: u64,
    /// Trajectories in which every postselection succeeded.
    pub accepted: u64,
    /// Final computational-basis outcomes of accepted trajectories, indexed
    /// by basis state.
    pub counts: Vec<u64>,
    pub seed: u64,
}

impl TrajectoryStats {
    pub fn acceptance(&self) -> f64 {
        self.accepted as f64 / self.shots as f64
    }

    /// Fraction of all shots that were accepted and ended in `state`.
    pub fn frequency(&self, state: usize) -> f64 {
        self.counts[state] as f64 / self.shots as f64
    }
}

fn trajectory(c: &Circuit, input: &[C64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let mut v = input.to_vec();
    for g in &c.gates {
        if g.kind == GateKind::MeasurePostselect0 {
            let total: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let mut trial = v.clone();
            let kept = project_zero(&mut trial, g.targets[0]);
            let u: f64 = rng.gen();
            if u >= kept / total {
                return None;
            }
            let s = 1.0 / kept.sqrt();
            v = trial.into_iter().map(|x| x * s).collect();
        } else {
            apply_gate(&mut v, g);
        }
    }
    let total: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, x) in v.iter().enumerate() {
        let p = x.norm_sqr();
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return Some(i);
        }
    }
    Some(last)
}

/// Samples `shots` trajectories, each with its own stream seeded by
/// `seed + index`. Rejected trajectories stop at the failing measurement.
pub fn run_shots(
    c: &Circuit,
    input: &StateVector,
    shots: u64,
    seed: u64,
) -> Result<TrajectoryStats> {
    check_input(c, input)?;
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    if input.norm_sqr() == 0.0 {
        return Err(Error::VanishingBranch { probability: 0.0 });
    }
    let dim = 1usize << c.n_qubits;
    let amps = input.amplitudes();
    let counts = (0..shots)
        .into_par_iter()
        .fold(
            || vec![0u64; dim],
            |mut acc, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
                if let Some(k) = trajectory(c, amps, &mut rng) {
                    acc[k] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; dim],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(TrajectoryStats {
        shots,
        accepted: counts.iter().sum(),
        counts,
        seed,
    })
}
