//! Environment Hamiltonians and their coupling to the central qubit.
//!
//! All three environments share the same structure: a Hermitian part plus a
//! complex field `h = (h_x, h_y)` whose imaginary component makes them
//! non-Hermitian. The qubit couples only while it is in `|1⟩`, and it does so
//! by shifting the field, `h → h + δ`. Everything downstream relies on that
//! additivity.
//!
//! Chains are periodic. For `N = 2` the bonds `(0, 1)` and `(1, 0)` are the
//! same bond, and it is emitted once. This changes the two-site spectrum
//! relative to a naive double count and matches the explicit two-site
//! Hamiltonian used by the circuit protocol.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Basis, OperatorSum, SiteOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ising,
    Heisenberg,
    Fermi,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ising => "ising",
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Fermi => "fermi",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ising" => Ok(ModelKind::Ising),
            "heisenberg" => Ok(ModelKind::Heisenberg),
            "fermi" => Ok(ModelKind::Fermi),
            other => Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        }
    }
}

/// Model kind plus every physical parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Number of lattice sites.
    pub n: usize,
    /// Ising/Heisenberg exchange or Fermi hopping amplitude.
    pub j: f64,
    /// On-site interaction, Fermi model only.
    #[serde(default)]
    pub u: f64,
    /// Complex transverse field `(h_x, h_y)`.
    pub h: (f64, f64),
    /// Qubit–environment coupling `(δ_x, δ_y)`.
    #[serde(default)]
    pub delta: (f64, f64),
    /// Total particle number, Fermi model only; defaults to `n` (half filling).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filling: Option<usize>,
}

impl ModelSpec {
    pub fn ising(n: usize, j: f64, h: (f64, f64), delta: (f64, f64)) -> Self {
        Self {
            kind: ModelKind::Ising,
            n,
            j,
            u: 0.0,
            h,
            delta,
            filling: None,
        }
    }

    pub fn heisenberg(n: usize, j: f64, h: (f64, f64), delta: (f64, f64)) -> Self {
        Self {
            kind: ModelKind::Heisenberg,
            ..Self::ising(n, j, h, delta)
        }
    }

    pub fn fermi(n: usize, j: f64, u: f64, h: (f64, f64), delta: (f64, f64)) -> Self {
        Self {
            kind: ModelKind::Fermi,
            u,
            ..Self::ising(n, j, h, delta)
        }
    }

    pub fn with_h(mut self, h: (f64, f64)) -> Self {
        self.h = h;
        self
    }

    pub fn with_delta(mut self, delta: (f64, f64)) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_filling(mut self, filling: usize) -> Self {
        self.filling = Some(filling);
        self
    }

    /// Particle number used for the Fermi model.
    pub fn filling(&self) -> usize {
        self.filling.unwrap_or(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two sites, got {}",
                self.n
            )));
        }
        let reals = [
            self.j,
            self.u,
            self.h.0,
            self.h.1,
            self.delta.0,
            self.delta.1,
        ];
        if reals.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "model parameters must be finite".into(),
            ));
        }
        let bits = match self.kind {
            ModelKind::Fermi => 2 * self.n,
            _ => self.n,
        };
        if bits > 30 {
            return Err(Error::InvalidParameter(format!(
                "{bits} qubits/modes is beyond what a state vector can hold here"
            )));
        }
        if self.kind == ModelKind::Fermi && self.filling() > 2 * self.n {
            return Err(Error::InvalidParameter(format!(
                "filling {} out of range 0..={}",
                self.filling(),
                2 * self.n
            )));
        }
        Ok(())
    }

    /// Basis the environment operators act on.
    pub fn basis(&self) -> Result<Basis> {
        self.validate()?;
        match self.kind {
            ModelKind::Fermi => Basis::sector(2 * self.n, self.filling()),
            _ => Ok(Basis::full(self.n)),
        }
    }

    /// The environment Hamiltonian at field `h`.
    pub fn environment(&self) -> Result<OperatorSum> {
        match self.kind {
            ModelKind::Ising => build_ising_env(self),
            ModelKind::Heisenberg => build_heisenberg_env(self),
            ModelKind::Fermi => build_fermi_env(self),
        }
    }

    /// The environment seen while the qubit is in `|1⟩`: field `h + δ`.
    pub fn shifted_environment(&self) -> Result<OperatorSum> {
        self.environment()?.plus(&build_coupling(self)?)
    }
}

/// Coupling given as magnitude and angle, `(δ_x, δ_y) = |δ|(sin θ, cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingAngle {
    pub magnitude: f64,
    pub theta: f64,
}

impl CouplingAngle {
    pub fn to_delta(self) -> (f64, f64) {
        theta_to_delta(self)
    }
}

pub fn theta_to_delta(c: CouplingAngle) -> (f64, f64) {
    let (s, co) = c.theta.sin_cos();
    (c.magnitude * s, c.magnitude * co)
}

/// Nearest-neighbour bonds of a ring; a two-site ring has a single bond.
pub fn periodic_bonds(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|j| (j, (j + 1) % n)).collect(),
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn im(x: f64) -> C64 {
    C64::new(0.0, x)
}

fn expect_kind(spec: &ModelSpec, kind: ModelKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {kind} model, got {}",
            spec.kind
        )));
    }
    Ok(())
}

/// `−Σ_j (a_x X_j + i a_y Y_j)`, skipping vanishing components.
fn push_spin_field(op: &mut OperatorSum, a: (f64, f64)) {
    for j in 0..op.n_sites() {
        if a.0 != 0.0 {
            op.add(re(-a.0), &[(j, SiteOp::X)]);
        }
        if a.1 != 0.0 {
            op.add(im(-a.1), &[(j, SiteOp::Y)]);
        }
    }
}

/// Complex transverse-field Ising ring, `−Σ_j [J Z_j Z_{j+1} + h_x X_j + i h_y Y_j]`.
pub fn build_ising_env(spec: &ModelSpec) -> Result<OperatorSum> {
    expect_kind(spec, ModelKind::Ising)?;
    let mut op = OperatorSum::new(spec.n);
    for (a, b) in periodic_bonds(spec.n) {
        op.add(re(-spec.j), &[(a, SiteOp::Z), (b, SiteOp::Z)]);
    }
    push_spin_field(&mut op, spec.h);
    Ok(op)
}

/// Isotropic Heisenberg ring in a complex field,
/// `−J Σ (XX + YY + ZZ) − Σ (h_x X_j + i h_y Y_j)`.
pub fn build_heisenberg_env(spec: &ModelSpec) -> Result<OperatorSum> {
    expect_kind(spec, ModelKind::Heisenberg)?;
    let mut op = OperatorSum::new(spec.n);
    for (a, b) in periodic_bonds(spec.n) {
        for p in [SiteOp::X, SiteOp::Y, SiteOp::Z] {
            op.add(re(-spec.j), &[(a, p), (b, p)]);
        }
    }
    push_spin_field(&mut op, spec.h);
    Ok(op)
}

/// Jordan–Wigner mode of spin-up at site `j`.
pub fn mode_up(j: usize) -> usize {
    j
}

/// Jordan–Wigner mode of spin-down at site `j` in an `n`-site lattice.
pub fn mode_down(n: usize, j: usize) -> usize {
    n + j
}

/// Adds `coeff · (c†_a c_b + c†_b c_a)` for modes `a ≠ b`.
///
/// With occupied = bit 1, `c†_a c_b = σ⁻_a (Π_{a<k<b} Z_k) σ⁺_b` for `a < b`,
/// and its adjoint has the ladders swapped over the same string.
fn push_hopping_pair(op: &mut OperatorSum, coeff: C64, a: usize, b: usize) {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut fwd = vec![SiteOp::I; op.n_sites()];
    for s in fwd.iter_mut().take(hi).skip(lo + 1) {
        *s = SiteOp::Z;
    }
    let mut bwd = fwd.clone();
    fwd[lo] = SiteOp::Lower;
    fwd[hi] = SiteOp::Raise;
    bwd[lo] = SiteOp::Raise;
    bwd[hi] = SiteOp::Lower;
    op.push_string(coeff, fwd).expect("string length matches");
    op.push_string(coeff, bwd).expect("string length matches");
}

/// Spin flip `a_x Σ_j (c†_{j↓} c_{j↑} + h.c.)` and gain/loss
/// `−i a_y Σ_j (n_{j↑} − n_{j↓})`, the latter written as
/// `(i a_y / 2) Σ_j (Z_{j↑} − Z_{j↓})`.
fn push_fermi_field(op: &mut OperatorSum, n: usize, a: (f64, f64)) {
    for j in 0..n {
        if a.0 != 0.0 {
            push_hopping_pair(op, re(a.0), mode_up(j), mode_down(n, j));
        }
        if a.1 != 0.0 {
            op.add(im(a.1 / 2.0), &[(mode_up(j), SiteOp::Z)]);
            op.add(im(-a.1 / 2.0), &[(mode_down(n, j), SiteOp::Z)]);
        }
    }
}

/// Spinful lattice fermions on a ring with a non-Hermitian spin field,
/// restricted to the particle-number sector of `spec.filling()`.
///
/// Modes are ordered all spin-up sites first, then all spin-down sites; the
/// Jordan–Wigner strings run across that full ordering.
pub fn build_fermi_env(spec: &ModelSpec) -> Result<OperatorSum> {
    expect_kind(spec, ModelKind::Fermi)?;
    build_fermi_env_on(spec, spec.basis()?)
}

/// The Fermi Hamiltonian on an explicit basis of the `2n` modes, e.g. the
/// full Fock space.
pub fn build_fermi_env_on(spec: &ModelSpec, basis: Basis) -> Result<OperatorSum> {
    expect_kind(spec, ModelKind::Fermi)?;
    let n = spec.n;
    if basis.n_bits() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: basis.n_bits(),
        });
    }
    let mut op = OperatorSum::with_basis(basis);
    if spec.j != 0.0 {
        for (a, b) in periodic_bonds(n) {
            push_hopping_pair(&mut op, re(-spec.j), mode_up(a), mode_up(b));
            push_hopping_pair(&mut op, re(-spec.j), mode_down(n, a), mode_down(n, b));
        }
    }
    if spec.u != 0.0 {
        for j in 0..n {
            op.add(
                re(spec.u),
                &[
                    (mode_up(j), SiteOp::Occupied),
                    (mode_down(n, j), SiteOp::Occupied),
                ],
            );
        }
    }
    push_fermi_field(&mut op, n, spec.h);
    Ok(op)
}

/// The operator `V` with `H_env(h) + V = H_env(h + δ)`.
///
/// Spins: `V = −Σ(δ_x X_j + i δ_y Y_j)`. Fermions:
/// `V = Σ[δ_x (c†↓c↑ + h.c.) − i δ_y (n↑ − n↓)]`.
pub fn build_coupling(spec: &ModelSpec) -> Result<OperatorSum> {
    let basis = spec.basis()?;
    let mut op = OperatorSum::with_basis(basis);
    match spec.kind {
        ModelKind::Ising | ModelKind::Heisenberg => push_spin_field(&mut op, spec.delta),
        ModelKind::Fermi => push_fermi_field(&mut op, spec.n, spec.delta),
    }
    Ok(op)
}
