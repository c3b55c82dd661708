//! Ground states of non-Hermitian environments and related diagnostics.
//!
//! The ground state is the right eigenvector whose eigenvalue has the
//! smallest real part. Ties within [`TIE_TOL`] go first to the state with
//! the largest overlap with the polarized reference `|0…0⟩`, then to the
//! smallest `|Im λ|`.
//!
//! At an exceptional point the polarized state can be an exact eigenvector
//! sitting on a defective eigenvalue. Dense eigensolvers then return a small
//! cloud of split eigenvalues around it, some with slightly lower real part
//! and ill-conditioned vectors. When the reference is an exact eigenvector
//! and every eigenvalue below it lies within [`SNAP_WINDOW`]`·‖H‖₁`, the
//! reference itself is returned.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_general, norm1};
use crate::models::ModelSpec;
use crate::operator::{Basis, OperatorSum, StateVector};

/// Eigenvalues closer than this count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Relative radius of the split-eigenvalue cloud tolerated around an exact
/// polarized eigenvector.
pub const SNAP_WINDOW: f64 = 1e-3;

/// Largest dimension [`ground_state_auto`] diagonalizes densely before
/// trying the zero-momentum block.
pub const AUTO_DENSE_LIMIT: usize = 1024;

const EXACT_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub energy: C64,
    /// Unit norm; the largest component is real and positive.
    pub vector: StateVector,
    /// Another eigenvalue lies within [`TIE_TOL`] of `energy`.
    pub degenerate: bool,
    /// The eigenvalue sits on or next to a defective coalescence.
    pub near_exceptional: bool,
    /// `|⟨0…0|G⟩|`, zero when the basis does not contain `|0…0⟩`.
    pub polarized_overlap: f64,
    /// `‖H G − E G‖`.
    pub residual: f64,
}

fn fix_phase(v: StateVector) -> StateVector {
    let max = v.amplitudes().iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v;
    }
    let pivot = v
        .amplitudes()
        .iter()
        .find(|x| x.norm() >= max * (1.0 - 1e-9))
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    v.scaled(pivot.conj() / pivot.norm())
}

/// Ground-state selection on a dense matrix. `reference` is the index of the
/// polarized state, if present.
fn select_dense(m: &Mat<C64>, reference: Option<usize>) -> Result<(C64, StateVector, bool, bool)> {
    let res = eig_general(m)?;
    if res.is_empty() {
        return Err(Error::Eigensolver("empty matrix".into()));
    }
    let scale = norm1(m).max(f64::MIN_POSITIVE);
    let min_re = res
        .eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::INFINITY, f64::min);

    if let Some(r) = reference {
        let e_ref = m[(r, r)];
        let off: f64 = (0..m.nrows())
            .filter(|&i| i != r)
            .map(|i| m[(i, r)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        let exact = off <= EXACT_TOL * scale;
        let below_ok = res
            .eigenvalues
            .iter()
            .filter(|l| l.re < e_ref.re)
            .all(|l| (l - e_ref).norm() <= SNAP_WINDOW * scale);
        if exact && below_ok && e_ref.re <= min_re + SNAP_WINDOW * scale {
            let cloud = res
                .eigenvalues
                .iter()
                .filter(|l| (*l - e_ref).norm() <= SNAP_WINDOW * scale)
                .count();
            let ties = res
                .eigenvalues
                .iter()
                .filter(|l| (*l - e_ref).norm() < TIE_TOL * scale.max(1.0))
                .count();
            let v = StateVector::basis(m.nrows(), r);
            return Ok((e_ref, v, ties >= 2, cloud >= 2));
        }
    }

    let overlap = |i: usize| reference.map_or(0.0, |r| res.right_eigenvectors[i][r].norm());
    let candidates: Vec<usize> = (0..res.len())
        .filter(|&i| res.eigenvalues[i].re <= min_re + TIE_TOL)
        .collect();
    let best_overlap = candidates.iter().map(|&i| overlap(i)).fold(0.0, f64::max);
    let pick = candidates
        .iter()
        .copied()
        .filter(|&i| overlap(i) >= best_overlap - TIE_TOL)
        .min_by(|&a, &b| {
            res.eigenvalues[a]
                .im
                .abs()
                .total_cmp(&res.eigenvalues[b].im.abs())
        })
        .expect("at least one candidate");
    let energy = res.eigenvalues[pick];
    let degenerate = res
        .eigenvalues
        .iter()
        .filter(|l| (*l - energy).norm() < TIE_TOL)
        .count()
        >= 2;
    Ok((
        energy,
        res.right_eigenvectors[pick].clone(),
        degenerate,
        res.condition_flags[pick],
    ))
}

fn polarized_index(basis: &Basis) -> Option<usize> {
    basis.index_of(0)
}

fn finish(
    h: &OperatorSum,
    energy: C64,
    vector: StateVector,
    degenerate: bool,
    near_ep: bool,
) -> Result<GroundState> {
    let vector = fix_phase(vector);
    let residual = h.apply(&vector)?.distance(&vector.scaled(energy));
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::Eigensolver(format!(
            "ground-state residual {residual:.3e} exceeds {RESIDUAL_TOL:e}·‖H‖"
        )));
    }
    let polarized_overlap = polarized_index(h.basis()).map_or(0.0, |r| vector[r].norm());
    Ok(GroundState {
        energy,
        vector,
        degenerate,
        near_exceptional: near_ep,
        polarized_overlap,
        residual,
    })
}

/// Ground state by full dense diagonalization.
pub fn ground_state(h: &OperatorSum) -> Result<GroundState> {
    let m = h.to_dense()?;
    let (energy, vector, degenerate, near_ep) = select_dense(&m, polarized_index(h.basis()))?;
    finish(h, energy, vector, degenerate, near_ep)
}

/// Orbits of the one-site cyclic shift on `n`-bit patterns.
struct ShiftOrbits {
    n: usize,
    /// Smallest pattern of each orbit, ascending.
    reps: Vec<u64>,
    lens: Vec<usize>,
    /// Orbit index of every pattern.
    orbit_of: Vec<u32>,
}

fn rotate(b: u64, n: usize) -> u64 {
    let mask = (1u64 << n) - 1;
    ((b << 1) | (b >> (n - 1))) & mask
}

impl ShiftOrbits {
    fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let mut orbit_of = vec![u32::MAX; dim];
        let mut reps = Vec::new();
        let mut lens = Vec::new();
        for b in 0..dim as u64 {
            if orbit_of[b as usize] != u32::MAX {
                continue;
            }
            let id = reps.len() as u32;
            let mut c = b;
            let mut len = 0;
            loop {
                orbit_of[c as usize] = id;
                len += 1;
                c = rotate(c, n);
                if c == b {
                    break;
                }
            }
            reps.push(b);
            lens.push(len);
        }
        Self {
            n,
            reps,
            lens,
            orbit_of,
        }
    }

    fn members(&self, r: usize) -> impl Iterator<Item = u64> + '_ {
        let n = self.n;
        std::iter::successors(Some(self.reps[r]), move |&c| Some(rotate(c, n))).take(self.lens[r])
    }
}

fn shift_vector(v: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (b, x) in v.iter().enumerate() {
        out[rotate(b as u64, n) as usize] = *x;
    }
    out
}

/// Whether a full-basis operator commutes with the cyclic shift, probed
/// with a seeded random vector.
pub fn is_translation_invariant(h: &OperatorSum) -> Result<bool> {
    if !matches!(h.basis(), Basis::Full { .. }) || h.n_sites() < 2 {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let v = StateVector::new(
        (0..h.dim())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    );
    let n = h.n_sites();
    let h_then_t = shift_vector(h.apply(&v)?.amplitudes(), n);
    let t_then_h = h.apply(&StateVector::new(shift_vector(v.amplitudes(), n)))?;
    let diff = StateVector::new(h_then_t).distance(&t_then_h);
    Ok(diff <= 1e-12 * h.norm_bound().max(1.0) * v.norm())
}

/// Ground state restricted to the zero-momentum block of a translation
/// invariant spin chain.
///
/// The block uses orbit states `|r⟩ = L_r^{-1/2} Σ_{b ∈ orbit(r)} |b⟩`; the
/// selected block eigenvector is lifted back to the full basis. Ties and the
/// degeneracy flag refer to the block spectrum only.
pub fn ground_state_zero_momentum(h: &OperatorSum) -> Result<GroundState> {
    if !is_translation_invariant(h)? {
        return Err(Error::NotTranslationInvariant);
    }
    let n = h.n_sites();
    let orbits = ShiftOrbits::new(n);
    let k = orbits.reps.len();
    let mut block = Mat::<C64>::zeros(k, k);
    for r in 0..k {
        for b in orbits.members(r) {
            h.for_each_image(b, |dst, amp| {
                let rp = orbits.orbit_of[dst as usize] as usize;
                block[(rp, r)] += amp;
            });
        }
    }
    for r in 0..k {
        for rp in 0..k {
            block[(rp, r)] /= ((orbits.lens[r] * orbits.lens[rp]) as f64).sqrt();
        }
    }
    // The all-zero pattern is its own orbit and has index 0.
    let (energy, y, degenerate, near_ep) = select_dense(&block, Some(0))?;
    let mut full = vec![C64::new(0.0, 0.0); h.dim()];
    for (b, slot) in full.iter_mut().enumerate() {
        let r = orbits.orbit_of[b] as usize;
        *slot = y[r] / (orbits.lens[r] as f64).sqrt();
    }
    finish(
        h,
        energy,
        StateVector::new(full).normalized(),
        degenerate,
        near_ep,
    )
}

/// Dense diagonalization up to [`AUTO_DENSE_LIMIT`], the zero-momentum block
/// above it when the operator is translation invariant.
pub fn ground_state_auto(h: &OperatorSum) -> Result<GroundState> {
    if h.dim() > AUTO_DENSE_LIMIT && is_translation_invariant(h)? {
        ground_state_zero_momentum(h)
    } else {
        ground_state(h)
    }
}

/// Two-site Ising ground state
/// `[(h_x+h_y)/β, −α/2β, −α/2β, (h_x−h_y)/β]` with
/// `α = J − √(4h_x² − 4h_y² + J²)` and `β = √(4h_x² + Jα)`.
///
/// Components are in basis order `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn ground_state_ising2_closed_form(j: f64, hx: f64, hy: f64) -> Result<StateVector> {
    let radicand = 4.0 * hx * hx - 4.0 * hy * hy + j * j;
    if !radicand.is_finite() || radicand < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "α is complex: 4h_x² − 4h_y² + J² = {radicand}"
        )));
    }
    let alpha = j - radicand.sqrt();
    let beta_sq = 4.0 * hx * hx + j * alpha;
    if !(beta_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "β² = 4h_x² + Jα = {beta_sq} is not positive"
        )));
    }
    let beta = beta_sq.sqrt();
    let v = StateVector::from_real(&[
        (hx + hy) / beta,
        -alpha / (2.0 * beta),
        -alpha / (2.0 * beta),
        (hx - hy) / beta,
    ]);
    Ok(v.normalized())
}

/// `χ` together with the degeneracy state of both ground states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Susceptibility {
    pub chi: f64,
    /// `|⟨G(h+δ)|G(h)⟩|`.
    pub overlap: f64,
    /// Either ground state was degenerate, so `chi` depends on the solver's
    /// choice within the degenerate space.
    pub degenerate: bool,
}

/// `χ = −ln |⟨G(h+δ)|G(h)⟩|` with unit right eigenvectors.
///
/// `spec.h` and `spec.delta` are replaced by `h` and `delta`.
pub fn susceptibility(
    spec: &ModelSpec,
    h: (f64, f64),
    delta: (f64, f64),
) -> Result<Susceptibility> {
    let s = spec.with_h(h).with_delta(delta);
    let g0 = ground_state_auto(&s.environment()?)?;
    let gd = ground_state_auto(&s.shifted_environment()?)?;
    let overlap = gd.vector.inner(&g0.vector).norm();
    Ok(Susceptibility {
        // unit vectors overlap by at most one; the excess is rounding
        chi: 0.0 - overlap.min(1.0).ln(),
        overlap,
        degenerate: g0.degenerate || gd.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityMap {
    pub hx_axis: Vec<f64>,
    pub hy_axis: Vec<f64>,
    pub delta: (f64, f64),
    /// `chi[ix][iy]`.
    pub chi: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
}

impl SusceptibilityMap {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.chi[ix][iy]
    }

    /// Long-format CSV with columns `hx, hy, chi, degenerate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "hx,hy,chi,degenerate")?;
        for (ix, hx) in self.hx_axis.iter().enumerate() {
            for (iy, hy) in self.hy_axis.iter().enumerate() {
                writeln!(
                    w,
                    "{hx},{hy},{:e},{}",
                    self.chi[ix][iy], self.degenerate[ix][iy]
                )?;
            }
        }
        Ok(())
    }
}

/// [`susceptibility`] over a grid, points evaluated in parallel.
pub fn susceptibility_map(
    spec: &ModelSpec,
    hx_grid: &[f64],
    hy_grid: &[f64],
    delta: (f64, f64),
) -> Result<SusceptibilityMap> {
    if hx_grid.is_empty() || hy_grid.is_empty() {
        return Err(Error::InvalidParameter("empty susceptibility grid".into()));
    }
    let points: Vec<(usize, usize)> = (0..hx_grid.len())
        .flat_map(|ix| (0..hy_grid.len()).map(move |iy| (ix, iy)))
        .collect();
    let values: Vec<Susceptibility> = points
        .par_iter()
        .map(|&(ix, iy)| susceptibility(spec, (hx_grid[ix], hy_grid[iy]), delta))
        .collect::<Result<_>>()?;
    let mut chi = vec![vec![0.0; hy_grid.len()]; hx_grid.len()];
    let mut degenerate = vec![vec![false; hy_grid.len()]; hx_grid.len()];
    for (&(ix, iy), s) in points.iter().zip(&values) {
        chi[ix][iy] = s.chi;
        degenerate[ix][iy] = s.degenerate;
    }
    Ok(SusceptibilityMap {
        hx_axis: hx_grid.to_vec(),
        hy_axis: hy_grid.to_vec(),
        delta,
        chi,
        degenerate,
    })
}

/// Largest `|Im λ|` over the full spectrum.
pub fn spectrum_reality(h: &OperatorSum) -> Result<f64> {
    Ok(eig_general(&h.to_dense()?)?.max_imag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_ising_env, ModelSpec};

    fn ising(n: usize, j: f64, h: (f64, f64)) -> OperatorSum {
        build_ising_env(&ModelSpec::ising(n, j, h, (0.0, 0.0))).unwrap()
    }

    fn phase_free_distance(a: &StateVector, b: &StateVector) -> f64 {
        let c = a.inner(b);
        if c.norm() == 0.0 {
            return a.distance(b);
        }
        a.scaled(c / c.norm()).distance(b)
    }

    #[test]
    fn closed_form_numbers() {
        let v = ground_state_ising2_closed_form(0.5, 1.0, 0.0).unwrap();
        let want = [0.5574, 0.4352, 0.4352, 0.5574];
        for (x, w) in v.amplitudes().iter().zip(want) {
            assert!((x.re - w).abs() < 1e-4 && x.im == 0.0);
        }
        let v = ground_state_ising2_closed_form(0.3, 1.0, 1.0 - 1e-3).unwrap();
        assert!(v[0].re > v[3].re);
    }

    #[test]
    fn closed_form_agrees_with_dense() {
        let v = ground_state_ising2_closed_form(0.5, 1.0, 0.9).unwrap();
        let g = ground_state(&ising(2, 0.5, (1.0, 0.9))).unwrap();
        assert!(phase_free_distance(&v, &g.vector) < 1e-10);
        assert!(!g.degenerate);
    }

    #[test]
    fn closed_form_rejects_broken_phase() {
        assert!(ground_state_ising2_closed_form(0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn polarized_ground_state_on_exceptional_line() {
        for n in [2, 3, 5] {
            let g = ground_state(&ising(n, 0.5, (1.0, 1.0))).unwrap();
            assert!((g.polarized_overlap - 1.0).abs() < 1e-14);
            assert!(g.residual == 0.0);
        }
    }

    #[test]
    fn zero_field_doublet_prefers_polarized() {
        let g = ground_state(&ising(4, 1.0, (0.0, 0.0))).unwrap();
        assert!(g.degenerate);
        assert!((g.polarized_overlap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_momentum_matches_dense() {
        let h = ising(6, 0.5, (1.0, 0.6));
        let a = ground_state(&h).unwrap();
        let b = ground_state_zero_momentum(&h).unwrap();
        assert!((a.energy - b.energy).norm() < 1e-10);
        assert!(phase_free_distance(&a.vector, &b.vector) < 1e-8);
    }

    #[test]
    fn translation_check_rejects_site_dependent_field() {
        let mut h = ising(4, 0.5, (1.0, 0.0));
        h.add(C64::new(0.3, 0.0), &[(0, crate::operator::SiteOp::Z)]);
        assert!(!is_translation_invariant(&h).unwrap());
        assert_eq!(
            ground_state_zero_momentum(&h).unwrap_err(),
            Error::NotTranslationInvariant
        );
    }

    #[test]
    fn shift_orbits_cover_basis() {
        let o = ShiftOrbits::new(6);
        assert_eq!(o.lens.iter().sum::<usize>(), 64);
        // necklaces of 6 binary beads
        assert_eq!(o.reps.len(), 14);
    }

    #[test]
    fn self_susceptibility_is_zero() {
        let spec = ModelSpec::ising(4, 0.5, (1.0, 0.5), (0.0, 0.0));
        let s = susceptibility(&spec, (1.0, 0.5), (0.0, 0.0)).unwrap();
        assert!(s.chi.abs() < 1e-12);
    }

    #[test]
    fn map_of_one_point_is_susceptibility() {
        let spec = ModelSpec::ising(4, 0.5, (1.0, 0.5), (0.0, 0.0));
        let d = (0.05, 0.05);
        let m = susceptibility_map(&spec, &[1.0], &[0.7], d).unwrap();
        let s = susceptibility(&spec, (1.0, 0.7), d).unwrap();
        assert_eq!(m.get(0, 0), s.chi);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("hx,hy,chi,degenerate\n1,0.7,"));
        assert!(susceptibility_map(&spec, &[], &[0.1], d).is_err());
    }

    #[test]
    fn reality_of_spectrum() {
        assert!(spectrum_reality(&ising(4, 0.5, (1.0, 0.0))).unwrap() < 1e-10);
        assert!(spectrum_reality(&ising(4, 0.5, (1.0, 0.5))).unwrap() < 1e-8);
        assert!(spectrum_reality(&ising(4, 0.5, (1.0, 1.5))).unwrap() > 1e-2);
    }
}
