use faer::Mat;
use nhdeco::linalg::{adjoint, eig_general, max_abs_diff};
use nhdeco::models::{build_coupling, build_fermi_env_on, ModelKind, ModelSpec};
use nhdeco::operator::Basis;
use nhdeco::spectral::spectrum_reality;
use nhdeco::{OperatorSum, SiteOp, StateVector, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `c_a` on an occupation bitstring, with the fermionic sign counted over
/// modes below `a`.
fn annihilate(a: usize, s: u64) -> Option<(f64, u64)> {
    if s >> a & 1 == 0 {
        return None;
    }
    let below = (s & ((1u64 << a) - 1)).count_ones();
    Some((if below % 2 == 0 { 1.0 } else { -1.0 }, s & !(1 << a)))
}

fn create(a: usize, s: u64) -> Option<(f64, u64)> {
    if s >> a & 1 == 1 {
        return None;
    }
    let below = (s & ((1u64 << a) - 1)).count_ones();
    Some((if below % 2 == 0 { 1.0 } else { -1.0 }, s | (1 << a)))
}

/// `c†_a c_b |s⟩`.
fn hop(a: usize, b: usize, s: u64) -> Option<(f64, u64)> {
    let (s1, t) = annihilate(b, s)?;
    let (s2, u) = create(a, t)?;
    Some((s1 * s2, u))
}

fn ring(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        vec![(0, 1)]
    } else {
        (0..n).map(|j| (j, (j + 1) % n)).collect()
    }
}

/// Fermi Hamiltonian assembled directly in second quantization over the
/// full Fock space, modes `(j, ↑) = j` and `(j, ↓) = n + j`.
fn fock_oracle(spec: &ModelSpec) -> Mat<C64> {
    let n = spec.n;
    let dim = 1usize << (2 * n);
    let mut m = Mat::<C64>::zeros(dim, dim);
    let (hx, hy) = spec.h;
    for col in 0..dim {
        let s = col as u64;
        let mut add = |entry: Option<(f64, u64)>, c: C64| {
            if let Some((sign, row)) = entry {
                m[(row as usize, col)] += c * sign;
            }
        };
        for (a, b) in ring(n) {
            for off in [0, n] {
                add(hop(a + off, b + off, s), C64::new(-spec.j, 0.0));
                add(hop(b + off, a + off, s), C64::new(-spec.j, 0.0));
            }
        }
        for j in 0..n {
            let up = (s >> j & 1) as f64;
            let dn = (s >> (n + j) & 1) as f64;
            add(Some((1.0, s)), C64::new(spec.u * up * dn, -hy * (up - dn)));
            add(hop(n + j, j, s), C64::new(hx, 0.0));
            add(hop(j, n + j, s), C64::new(hx, 0.0));
        }
    }
    m
}

fn restrict(full: &Mat<C64>, basis: &Basis) -> Mat<C64> {
    Mat::from_fn(basis.dim(), basis.dim(), |i, k| {
        full[(basis.state(i) as usize, basis.state(k) as usize)]
    })
}

#[test]
fn two_site_fermi_matches_fock_oracle_in_every_sector() {
    for (j, u) in [(0.0, 0.4), (0.1, 0.4), (0.7, 0.0)] {
        let spec = ModelSpec::fermi(2, j, u, (0.8, 0.3), (0.0, 0.0));
        let oracle = fock_oracle(&spec);
        let full = build_fermi_env_on(&spec, Basis::full(4)).unwrap();
        assert!(max_abs_diff(&full.to_dense().unwrap(), &oracle) < 1e-14);
        for filling in 0..=4 {
            let s = spec.with_filling(filling);
            let h = s.environment().unwrap();
            let want = restrict(&oracle, h.basis());
            assert!(max_abs_diff(&h.to_dense().unwrap(), &want) < 1e-14);
        }
    }
}

#[test]
fn three_site_fermi_matches_fock_oracle() {
    let spec = ModelSpec::fermi(3, 0.2, 0.5, (0.6, 0.4), (0.0, 0.0));
    let full = build_fermi_env_on(&spec, Basis::full(6)).unwrap();
    assert!(max_abs_diff(&full.to_dense().unwrap(), &fock_oracle(&spec)) < 1e-14);
}

#[test]
fn zero_hopping_is_diagonal_except_spin_flip() {
    let spec = ModelSpec::fermi(2, 0.0, 0.4, (0.8, 0.3), (0.0, 0.0));
    let m = build_fermi_env_on(&spec, Basis::full(4))
        .unwrap()
        .to_dense()
        .unwrap();
    for r in 0..16u64 {
        for c in 0..16u64 {
            if r == c || m[(r as usize, c as usize)].norm() == 0.0 {
                continue;
            }
            // an off-diagonal entry moves one particle between the two spin
            // modes of a single site
            let diff = r ^ c;
            assert!(diff == 0b0101 || diff == 0b1010, "{r:04b} {c:04b}");
        }
    }
}

fn subset_sums(levels: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << levels.len()) {
        if mask.count_ones() as usize == k {
            out.push(
                (0..levels.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| levels[i])
                    .sum(),
            );
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvalues of the `n × n` ring hopping matrix `−J (δ_{a,b±1})`.
fn single_particle_levels(n: usize, j: f64) -> Vec<f64> {
    let mut m = Mat::<C64>::zeros(n, n);
    for (a, b) in ring(n) {
        m[(a, b)] += C64::new(-j, 0.0);
        m[(b, a)] += C64::new(-j, 0.0);
    }
    eig_general(&m)
        .unwrap()
        .eigenvalues
        .iter()
        .map(|l| l.re)
        .collect()
}

#[test]
fn free_fermions_fill_single_particle_levels() {
    for n in [2, 3, 4] {
        let j = 0.3;
        let one = single_particle_levels(n, j);
        // a two-site ring has one bond, so its band is half as wide
        let width = if n == 2 { j } else { 2.0 * j };
        for want in &one {
            let on_band = (0..n).any(|q| {
                let e = -width * (std::f64::consts::TAU * q as f64 / n as f64).cos();
                (e - want).abs() < 1e-12
            });
            assert!(on_band, "level {want} is not a ring cosine");
        }
        let both_spins: Vec<f64> = one.iter().chain(one.iter()).copied().collect();
        for filling in [1, n, 2 * n - 1] {
            let spec = ModelSpec::fermi(n, j, 0.0, (0.0, 0.0), (0.0, 0.0)).with_filling(filling);
            let s = eig_general(&spec.environment().unwrap().to_dense().unwrap()).unwrap();
            let mut got: Vec<f64> = s.eigenvalues.iter().map(|l| l.re).collect();
            got.sort_by(f64::total_cmp);
            let want = subset_sums(&both_spins, filling);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "n={n} filling={filling}: {a} vs {b}");
            }
        }
    }
}

fn number_operator(bits: usize) -> OperatorSum {
    let mut op = OperatorSum::new(bits);
    for k in 0..bits {
        op.add(C64::new(1.0, 0.0), &[(k, SiteOp::Occupied)]);
    }
    op
}

#[test]
fn particle_number_commutes_with_fermi_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 3, 4] {
        let spec = ModelSpec::fermi(n, 0.3, 0.7, (0.9, 0.4), (0.1, 0.05));
        let h = build_fermi_env_on(&spec.with_h((1.0, 0.5)), Basis::full(2 * n)).unwrap();
        let num = number_operator(2 * n);
        let v = StateVector::new(
            (0..1 << (2 * n))
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .normalized();
        let hn = h.apply(&num.apply(&v).unwrap()).unwrap();
        let nh = num.apply(&h.apply(&v).unwrap()).unwrap();
        assert!(hn.distance(&nh) <= 1e-12);
    }
}

fn all_kinds(n_spin: usize, n_fermi: usize, h: (f64, f64), d: (f64, f64)) -> [ModelSpec; 3] {
    [
        ModelSpec::ising(n_spin, 0.5, h, d),
        ModelSpec::heisenberg(n_spin, 0.5, h, d),
        ModelSpec::fermi(n_fermi, 0.1, 0.4, h, d),
    ]
}

#[test]
fn real_fields_give_hermitian_operators() {
    for n in 2..=6 {
        for spec in all_kinds(n, n.min(4), (0.8, 0.0), (0.07, 0.0)) {
            for op in [
                spec.environment().unwrap(),
                build_coupling(&spec).unwrap(),
                spec.shifted_environment().unwrap(),
            ] {
                let m = op.to_dense().unwrap();
                assert!(max_abs_diff(&m, &adjoint(&m)) < 1e-15, "{spec:?}");
            }
        }
    }
}

fn shift(b: usize, n: usize) -> usize {
    ((b << 1) | (b >> (n - 1))) & ((1 << n) - 1)
}

#[test]
fn spin_rings_are_translation_invariant() {
    for kind in [ModelKind::Ising, ModelKind::Heisenberg] {
        for n in 2..=6 {
            let spec = ModelSpec {
                kind,
                ..ModelSpec::ising(n, 0.5, (1.0, 0.6), (0.0, 0.0))
            };
            let m = spec.environment().unwrap().to_dense().unwrap();
            let dim = 1 << n;
            for r in 0..dim {
                for c in 0..dim {
                    assert!((m[(shift(r, n), shift(c, n))] - m[(r, c)]).norm() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn unbroken_region_has_real_spectrum() {
    for hy in [0.0, 0.3, 0.6, 0.9] {
        for n in [2, 4, 6] {
            for spec in all_kinds(n, n.min(4), (1.0, hy), (0.0, 0.0)) {
                let im = spectrum_reality(&spec.environment().unwrap()).unwrap();
                assert!(im <= 1e-8, "{:?} n={n} hy={hy}: {im:e}", spec.kind);
            }
        }
    }
}

#[test]
fn ising_four_sites_is_real_below_and_complex_above_transition() {
    let below = ModelSpec::ising(4, 0.5, (1.0, 0.5), (0.0, 0.0));
    assert!(spectrum_reality(&below.environment().unwrap()).unwrap() < 1e-9);
    let above = below.with_h((1.0, 1.5));
    assert!(spectrum_reality(&above.environment().unwrap()).unwrap() > 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn environment_plus_coupling_is_shifted_environment(
        kind in 0usize..3,
        n in 2usize..=5,
        h in (-1.5f64..1.5, -1.5f64..1.5),
        d in (-0.3f64..0.3, -0.3f64..0.3),
    ) {
        let spec = all_kinds(n, n.min(3), h, d)[kind];
        let sum = spec.environment().unwrap().plus(&build_coupling(&spec).unwrap()).unwrap();
        let shifted = spec.shifted_environment().unwrap();
        prop_assert!(max_abs_diff(&sum.to_dense().unwrap(), &shifted.to_dense().unwrap()) < 1e-14);
    }
}
