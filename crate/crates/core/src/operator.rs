//! Operator strings, sums of strings, and their action on state vectors.
//!
//! Site `j` is bit `j` of a basis index and `|0⟩` is the `Z = +1` state.
//! Every single-site operator used here has at most one non-zero entry per
//! column, so a whole string acts on a basis state by flipping a fixed set of
//! bits and multiplying by a phase. [`OperatorSum::apply`] exploits that;
//! [`OperatorSum::to_dense`] instead assembles explicit Kronecker products,
//! which keeps the two paths independent of each other.

use std::ops::{Index, IndexMut};
use std::sync::{Arc, OnceLock};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis dimension for which dense matrices are assembled by default.
pub const DEFAULT_DENSE_CAP: usize = 1 << 14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// A single-site operator.
///
/// `Raise` is `σ⁺ = |0⟩⟨1| = (X + iY)/2` and `Lower` its adjoint. Under the
/// Jordan–Wigner mapping an occupied fermion mode is bit value `1`, so the
/// creation operator of a mode is `Lower` dressed with a `Z` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteOp {
    I,
    X,
    Y,
    Z,
    Raise,
    Lower,
    Occupied,
    Vacant,
}

impl SiteOp {
    /// Dense 2×2 matrix, rows and columns indexed by the bit value.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            SiteOp::I => [[ONE, ZERO], [ZERO, ONE]],
            SiteOp::X => [[ZERO, ONE], [ONE, ZERO]],
            SiteOp::Y => [[ZERO, -I], [I, ZERO]],
            SiteOp::Z => [[ONE, ZERO], [ZERO, -ONE]],
            SiteOp::Raise => [[ZERO, ONE], [ZERO, ZERO]],
            SiteOp::Lower => [[ZERO, ZERO], [ONE, ZERO]],
            SiteOp::Occupied => [[ZERO, ZERO], [ZERO, ONE]],
            SiteOp::Vacant => [[ONE, ZERO], [ZERO, ZERO]],
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            SiteOp::I => "I",
            SiteOp::X => "X",
            SiteOp::Y => "Y",
            SiteOp::Z => "Z",
            SiteOp::Raise => "S+",
            SiteOp::Lower => "S-",
            SiteOp::Occupied => "n",
            SiteOp::Vacant => "(1-n)",
        }
    }
}

/// Dense complex amplitudes. The norm is not required to be one: postselected
/// and non-unitary evolution both produce unnormalized states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![ZERO; dim])
    }

    /// The basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = ONE;
        v
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self(amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns `self / ‖self‖`; a zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// `⟨self|other⟩`, conjugating `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self(self.0.iter().map(|a| a * c).collect())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: C64, other: &StateVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &StateVector) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Dense matrix-vector product.
    pub fn mat_mul(m: &Mat<C64>, v: &StateVector) -> Result<StateVector> {
        if m.ncols() != v.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.ncols(),
                found: v.dim(),
            });
        }
        let mut out = vec![ZERO; m.nrows()];
        for (j, &x) in v.0.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            let col = m.col(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * x;
            }
        }
        Ok(StateVector(out))
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

/// Basis states with a fixed number of set bits, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberSector {
    n_bits: usize,
    particles: usize,
    states: Vec<u64>,
}

impl NumberSector {
    pub fn new(n_bits: usize, particles: usize) -> Result<Self> {
        if particles > n_bits || n_bits > 40 {
            return Err(Error::InvalidParameter(format!(
                "cannot place {particles} particles in {n_bits} modes"
            )));
        }
        let states = (0u64..1 << n_bits)
            .filter(|s| s.count_ones() as usize == particles)
            .collect();
        Ok(Self {
            n_bits,
            particles,
            states,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }
}

/// The set of basis states an operator acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Basis {
    /// All `2^n` bit strings.
    Full { n_bits: usize },
    /// Bit strings of fixed popcount (fermions at fixed particle number).
    Sector(Arc<NumberSector>),
}

impl Basis {
    pub fn full(n_bits: usize) -> Self {
        Basis::Full { n_bits }
    }

    pub fn sector(n_bits: usize, particles: usize) -> Result<Self> {
        Ok(Basis::Sector(Arc::new(NumberSector::new(
            n_bits, particles,
        )?)))
    }

    pub fn n_bits(&self) -> usize {
        match self {
            Basis::Full { n_bits } => *n_bits,
            Basis::Sector(s) => s.n_bits,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full { n_bits } => 1 << n_bits,
            Basis::Sector(s) => s.states.len(),
        }
    }

    /// Bit string of the `i`-th basis vector.
    pub fn state(&self, i: usize) -> u64 {
        match self {
            Basis::Full { .. } => i as u64,
            Basis::Sector(s) => s.states[i],
        }
    }

    /// Position of a bit string in the basis, if it belongs to it.
    pub fn index_of(&self, state: u64) -> Option<usize> {
        match self {
            Basis::Full { n_bits } => ((state >> n_bits) == 0).then_some(state as usize),
            Basis::Sector(s) => s.states.binary_search(&state).ok(),
        }
    }
}

/// One weighted operator string.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub ops: Vec<SiteOp>,
}

impl Term {
    fn label(&self) -> String {
        let mut s = String::new();
        for (j, op) in self.ops.iter().enumerate() {
            if *op != SiteOp::I {
                if !s.is_empty() {
                    s.push(' ');
                }
                s.push_str(&format!("{}{}", op.symbol(), j));
            }
        }
        if s.is_empty() {
            s.push('I');
        }
        s
    }
}

/// A term reduced to bit masks: it sends `b` to `b ^ flip` with amplitude
/// `coeff · (−1)^{|b & sign|}` when `b & req_mask == req_val`, and kills `b`
/// otherwise.
#[derive(Debug, Clone, Copy)]
struct CompiledTerm {
    coeff: C64,
    flip: u64,
    sign: u64,
    req_mask: u64,
    req_val: u64,
}

impl CompiledTerm {
    fn new(term: &Term) -> Self {
        let mut c = CompiledTerm {
            coeff: term.coeff,
            flip: 0,
            sign: 0,
            req_mask: 0,
            req_val: 0,
        };
        for (j, op) in term.ops.iter().enumerate() {
            let bit = 1u64 << j;
            match op {
                SiteOp::I => {}
                SiteOp::X => c.flip |= bit,
                // Y = iXZ
                SiteOp::Y => {
                    c.flip |= bit;
                    c.sign |= bit;
                    c.coeff *= I;
                }
                SiteOp::Z => c.sign |= bit,
                SiteOp::Raise => {
                    c.flip |= bit;
                    c.req_mask |= bit;
                    c.req_val |= bit;
                }
                SiteOp::Lower => {
                    c.flip |= bit;
                    c.req_mask |= bit;
                }
                SiteOp::Occupied => {
                    c.req_mask |= bit;
                    c.req_val |= bit;
                }
                SiteOp::Vacant => c.req_mask |= bit,
            }
        }
        c
    }

    #[inline]
    fn act(&self, b: u64) -> Option<(u64, C64)> {
        if b & self.req_mask != self.req_val {
            return None;
        }
        let amp = if (b & self.sign).count_ones() & 1 == 1 {
            -self.coeff
        } else {
            self.coeff
        };
        Some((b ^ self.flip, amp))
    }
}

/// A complex-weighted sum of operator strings over `n_sites` sites.
///
/// Terms are not merged or simplified; two sums describing the same operator
/// may differ term by term.
#[derive(Debug, Clone)]
pub struct OperatorSum {
    n_sites: usize,
    basis: Basis,
    terms: Vec<Term>,
    compiled: OnceLock<Vec<CompiledTerm>>,
}

impl PartialEq for OperatorSum {
    fn eq(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites && self.basis == other.basis && self.terms == other.terms
    }
}

impl OperatorSum {
    /// Empty operator on the full `2^n_sites` basis.
    pub fn new(n_sites: usize) -> Self {
        Self::with_basis(Basis::full(n_sites))
    }

    pub fn with_basis(basis: Basis) -> Self {
        Self {
            n_sites: basis.n_bits(),
            basis,
            terms: Vec::new(),
            compiled: OnceLock::new(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Appends a full operator string; its length must equal the site count.
    pub fn push_string(&mut self, coeff: C64, ops: Vec<SiteOp>) -> Result<()> {
        if ops.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: ops.len(),
            });
        }
        self.terms.push(Term { coeff, ops });
        self.compiled = OnceLock::new();
        Ok(())
    }

    /// Appends `coeff · Π op_site`, identity on the unlisted sites.
    ///
    /// Panics if a site index is out of range or listed twice.
    pub fn add(&mut self, coeff: C64, factors: &[(usize, SiteOp)]) {
        let mut ops = vec![SiteOp::I; self.n_sites];
        for &(site, op) in factors {
            assert!(site < self.n_sites, "site {site} out of range");
            assert_eq!(ops[site], SiteOp::I, "site {site} listed twice");
            ops[site] = op;
        }
        self.terms.push(Term { coeff, ops });
        self.compiled = OnceLock::new();
    }

    /// Term-wise concatenation of two sums over the same basis.
    pub fn plus(&self, other: &OperatorSum) -> Result<OperatorSum> {
        if self.basis != other.basis {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.compiled = OnceLock::new();
        Ok(out)
    }

    pub fn scaled(&self, c: C64) -> OperatorSum {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= c;
        }
        out.compiled = OnceLock::new();
        out
    }

    /// `Σ|coeff|`, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    fn compiled(&self) -> &[CompiledTerm] {
        self.compiled
            .get_or_init(|| self.terms.iter().map(CompiledTerm::new).collect())
    }

    /// `op · v`. The input is left untouched.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        let mut out = vec![ZERO; v.dim()];
        self.apply_into(v.amplitudes(), &mut out);
        Ok(StateVector(out))
    }

    /// Calls `f(dst, amp)` for every nonzero `amp · |dst⟩` in `op |b⟩`, term by
    /// term and without merging. `b` and `dst` are raw bit patterns.
    pub(crate) fn for_each_image(&self, b: u64, mut f: impl FnMut(u64, C64)) {
        for t in self.compiled() {
            if let Some((dst, amp)) = t.act(b) {
                f(dst, amp);
            }
        }
    }

    /// Accumulates `op · input` into `out` (which is not cleared).
    pub(crate) fn apply_into(&self, input: &[C64], out: &mut [C64]) {
        let terms = self.compiled();
        match &self.basis {
            Basis::Full { .. } => {
                for t in terms {
                    for (b, &x) in input.iter().enumerate() {
                        if let Some((dst, amp)) = t.act(b as u64) {
                            out[dst as usize] += amp * x;
                        }
                    }
                }
            }
            Basis::Sector(sector) => {
                for t in terms {
                    for (i, &b) in sector.states.iter().enumerate() {
                        if let Some((dst, amp)) = t.act(b) {
                            // Single strings may leave the sector; the full
                            // sum does not, so those pieces cancel and can
                            // be dropped.
                            if let Ok(j) = sector.states.binary_search(&dst) {
                                out[j] += amp * input[i];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Dense matrix with the default cap.
    pub fn to_dense(&self) -> Result<Mat<C64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    /// Dense matrix assembled from Kronecker products of the site matrices.
    pub fn to_dense_capped(&self, cap: usize) -> Result<Mat<C64>> {
        let dim = self.dim();
        if dim > cap {
            return Err(Error::DenseCapExceeded { dim, cap });
        }
        let mut m = Mat::<C64>::zeros(dim, dim);
        for term in &self.terms {
            // Sparse Kronecker product, built site by site as (row, col, value).
            let mut entries: Vec<(u64, u64, C64)> = vec![(0, 0, term.coeff)];
            for (j, op) in term.ops.iter().enumerate() {
                let site = op.matrix();
                let mut next = Vec::with_capacity(entries.len() * 2);
                for &(r, c, v) in &entries {
                    for (a, row) in site.iter().enumerate() {
                        for (b, &x) in row.iter().enumerate() {
                            if x != ZERO {
                                next.push((r | (a as u64) << j, c | (b as u64) << j, v * x));
                            }
                        }
                    }
                }
                entries = next;
            }
            for (r, c, v) in entries {
                if let (Some(i), Some(k)) = (self.basis.index_of(r), self.basis.index_of(c)) {
                    m[(i, k)] += v;
                }
            }
        }
        Ok(m)
    }
}

impl std::fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in &self.terms {
            writeln!(f, "({:+}{:+}i) {}", t.coeff.re, t.coeff.im, t.label())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_algebra_on_one_site() {
        let x = SiteOp::X.matrix();
        let y = SiteOp::Y.matrix();
        let z = SiteOp::Z.matrix();
        let mul = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| {
            let mut out = [[ZERO; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        out[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            out
        };
        for p in [x, y, z] {
            assert_eq!(mul(p, p), SiteOp::I.matrix());
        }
        let ixz = mul(x, z).map(|row| row.map(|e| e * I));
        assert_eq!(ixz, y);
    }

    #[test]
    fn x_flips_zero_to_one() {
        let mut op = OperatorSum::new(1);
        op.add(ONE, &[(0, SiteOp::X)]);
        let out = op.apply(&StateVector::basis(2, 0)).unwrap();
        assert_eq!(out, StateVector::basis(2, 1));
    }

    #[test]
    fn zz_on_01_gives_minus() {
        // |01⟩: site 0 in |0⟩, site 1 in |1⟩ -> index 2
        let mut op = OperatorSum::new(2);
        op.add(ONE, &[(0, SiteOp::Z), (1, SiteOp::Z)]);
        let v = StateVector::basis(4, 2);
        assert_eq!(op.apply(&v).unwrap(), v.scaled(-ONE));
    }

    #[test]
    fn x_plus_iy_is_twice_raising() {
        let mut op = OperatorSum::new(1);
        op.add(ONE, &[(0, SiteOp::X)]);
        op.add(I, &[(0, SiteOp::Y)]);
        let m = op.to_dense().unwrap();
        assert_eq!(m[(0, 0)], ZERO);
        assert_eq!(m[(0, 1)], c(2.0, 0.0));
        assert_eq!(m[(1, 0)], ZERO);
        assert_eq!(m[(1, 1)], ZERO);
    }

    #[test]
    fn identity_tensor_z_is_alternating_diagonal() {
        // I ⊗ Z with site 0 the rightmost factor: Z acts on bit 0.
        let mut op = OperatorSum::new(2);
        op.add(ONE, &[(0, SiteOp::Z)]);
        let m = op.to_dense().unwrap();
        for (k, want) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            assert_eq!(m[(k, k)], c(want, 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = OperatorSum::new(2);
        let err = op.apply(&StateVector::zeros(8)).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 4,
                found: 8
            }
        );
    }

    #[test]
    fn dense_cap_is_enforced() {
        let op = OperatorSum::new(5);
        assert!(matches!(
            op.to_dense_capped(16),
            Err(Error::DenseCapExceeded { dim: 32, cap: 16 })
        ));
    }

    #[test]
    fn push_string_checks_length() {
        let mut op = OperatorSum::new(3);
        assert!(op.push_string(ONE, vec![SiteOp::X; 2]).is_err());
        assert!(op.push_string(ONE, vec![SiteOp::X; 3]).is_ok());
    }

    #[test]
    fn ladder_and_projector_matrices() {
        let mut op = OperatorSum::new(1);
        op.add(ONE, &[(0, SiteOp::Raise)]);
        op.add(c(2.0, 0.0), &[(0, SiteOp::Lower)]);
        op.add(c(3.0, 0.0), &[(0, SiteOp::Occupied)]);
        op.add(c(5.0, 0.0), &[(0, SiteOp::Vacant)]);
        let m = op.to_dense().unwrap();
        let v = op
            .apply(&StateVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]))
            .unwrap();
        // column-by-column agreement with the dense form
        let want =
            StateVector::mat_mul(&m, &StateVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)])).unwrap();
        assert!(v.distance(&want) < 1e-15);
        assert_eq!(m[(0, 1)], ONE);
        assert_eq!(m[(1, 0)], c(2.0, 0.0));
        assert_eq!(m[(1, 1)], c(3.0, 0.0));
        assert_eq!(m[(0, 0)], c(5.0, 0.0));
    }

    #[test]
    fn sector_basis_drops_out_of_sector_pieces() {
        // X0 X1 + Y0 Y1 = 2(σ⁺σ⁻ + σ⁻σ⁺) conserves popcount.
        let basis = Basis::sector(2, 1).unwrap();
        let mut op = OperatorSum::with_basis(basis);
        op.add(ONE, &[(0, SiteOp::X), (1, SiteOp::X)]);
        op.add(ONE, &[(0, SiteOp::Y), (1, SiteOp::Y)]);
        assert_eq!(op.dim(), 2);
        let m = op.to_dense().unwrap();
        assert_eq!(m[(0, 1)], c(2.0, 0.0));
        assert_eq!(m[(1, 0)], c(2.0, 0.0));
        let out = op.apply(&StateVector::basis(2, 0)).unwrap();
        assert_eq!(out, StateVector::new(vec![ZERO, c(2.0, 0.0)]));
    }
}
