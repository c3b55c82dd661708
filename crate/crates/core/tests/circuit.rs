use faer::Mat;
use nhdeco::circuit::{
    adaptive_schedule, run_exact, run_shots, synthesize_ug, trotter_step, trotter_unitary_step,
    Circuit, GateKind, TwoSiteParams, ANCILLA,
};
use nhdeco::linalg::{adjoint, expm_dense, max_abs_diff};
use nhdeco::models::ModelSpec;
use nhdeco::spectral::ground_state_ising2_closed_form;
use nhdeco::{StateVector, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn up_to_sign(a: &StateVector, xi: [f64; 4]) -> f64 {
    let x = StateVector::from_real(&xi);
    a.distance(&x)
        .min(a.distance(&x.scaled(C64::new(-1.0, 0.0))))
}

fn exp_minus_i(h: &Mat<C64>, dt: f64) -> Mat<C64> {
    expm_dense(&Mat::from_fn(h.nrows(), h.ncols(), |i, j| {
        h[(i, j)] * C64::new(0.0, -dt)
    }))
    .unwrap()
}

fn register(system: &StateVector) -> StateVector {
    let mut v = vec![C64::new(0.0, 0.0); 8];
    v[..4].copy_from_slice(system.amplitudes());
    StateVector::new(v)
}

#[test]
fn prepares_two_site_ground_state() {
    let g = ground_state_ising2_closed_form(0.01, 1.0, 0.2).unwrap();
    let xi: [f64; 4] = std::array::from_fn(|i| g[i].re);
    let c = synthesize_ug(xi).unwrap();
    let (out, p) = run_exact(&c, &StateVector::basis(4, 0)).unwrap();
    assert!((p - 1.0).abs() < 1e-14);
    assert!(up_to_sign(&out, xi) < 1e-10);
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn synthesis_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // rejection-sample away from vanishing denominators
        let (xi, c) = loop {
            let xi = random_unit(&mut rng);
            if let Ok(c) = synthesize_ug(xi) {
                break (xi, c);
            }
        };
        let u = c.dense_unitary().unwrap();
        let id = Mat::<C64>::identity(4, 4);
        prop_assert!(max_abs_diff(&(&adjoint(&u) * &u), &id) <= 1e-12);
        let u_inv = c.inverse().unwrap().dense_unitary().unwrap();
        prop_assert!(max_abs_diff(&(&u_inv * &u), &id) <= 1e-12);
        let prepared = StateVector::mat_mul(&u, &StateVector::basis(4, 0)).unwrap();
        prop_assert!(up_to_sign(&prepared, xi) <= 1e-10);
    }
}

#[test]
fn unitary_trotter_step_matches_exponential_to_first_order() {
    let (j, a_x, dt) = (0.01, 1.5, 0.05);
    let u = trotter_unitary_step(j, a_x, dt).dense_unitary().unwrap();
    let h = ModelSpec::ising(2, j, (a_x, 0.0), (0.0, 0.0))
        .environment()
        .unwrap()
        .to_dense()
        .unwrap();
    let exact = exp_minus_i(&h, dt);
    let err = max_abs_diff(&u, &exact);
    // the commutator [ZZ, X₀+X₁] enters at order J a_x dt²
    assert!(err < 4.0 * j * a_x * dt * dt, "{err:e}");
}

/// Deviation of one compensated step from `e^{−i dt H(h+δ)}` on the ground
/// state.
fn one_step_error(spec: &ModelSpec, dt: f64) -> f64 {
    let p = TwoSiteParams::shifted(spec).unwrap();
    let h = spec.shifted_environment().unwrap().to_dense().unwrap();
    let g = ground_state_ising2_closed_form(spec.j, spec.h.0, spec.h.1).unwrap();
    let exact = StateVector::mat_mul(&exp_minus_i(&h, dt), &g).unwrap();
    let step = trotter_step(&p, dt).unwrap();
    let (out, _) = run_exact(&step, &register(&g)).unwrap();
    let circ = StateVector::new(out.amplitudes()[..4].to_vec())
        .scaled(C64::new(step.total_compensation(), 0.0));
    circ.distance(&exact)
}

#[test]
fn compensated_step_error_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let spec = ModelSpec::ising(
            2,
            rng.gen_range(0.01..1.0),
            (1.0, rng.gen_range(0.0..0.9)),
            (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)),
        );
        let coarse = one_step_error(&spec, 0.02);
        let fine = one_step_error(&spec, 0.01);
        // halving dt cuts a local error of order dt² by about four
        assert!(
            fine < 0.3 * coarse + 1e-13,
            "{spec:?}: {coarse:e} -> {fine:e}"
        );
        assert!(coarse < 10.0 * 0.02 * 0.02, "{spec:?}: {coarse:e}");
    }
}

#[test]
fn shot_histogram_matches_exact_probabilities() {
    let spec = ModelSpec::ising(2, 0.01, (1.0, 0.5), (0.5, 0.5));
    let p = TwoSiteParams::shifted(&spec).unwrap();
    let mut c = Circuit::with_ancilla(3, ANCILLA).unwrap();
    c.push(GateKind::RY(0.7), &[0]).unwrap();
    c.push(GateKind::RY(-1.1), &[1]).unwrap();
    c.push(GateKind::CZ, &[0, 1]).unwrap();
    for _ in 0..3 {
        c.append(&trotter_step(&p, 0.1).unwrap()).unwrap();
    }
    let start = StateVector::basis(8, 0);
    let (exact, accept) = run_exact(&c, &start).unwrap();
    let shots = 100_000u64;
    let stats = run_shots(&c, &start, shots, 42).unwrap();
    let sigma = |p: f64| {
        (p * (1.0 - p) / shots as f64)
            .sqrt()
            .max(1.0 / shots as f64)
    };
    assert!((stats.acceptance() - accept).abs() <= 3.0 * sigma(accept));
    for k in 0..8 {
        let pk = exact[k].norm_sqr();
        assert!(
            (stats.frequency(k) - pk).abs() <= 3.0 * sigma(pk),
            "outcome {k}"
        );
    }
    assert_eq!(stats, run_shots(&c, &start, shots, 42).unwrap());
}

#[test]
fn tighter_tolerance_never_lengthens_a_step() {
    for hy in [0.2, 0.5, 0.9] {
        let spec = ModelSpec::ising(2, 0.01, (1.0, hy), (0.5, 0.5));
        let loose = adaptive_schedule(&spec, 1e-2, 2.0).unwrap();
        let tight = adaptive_schedule(&spec, 5e-3, 2.0).unwrap();
        let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
        assert!(max(&tight) <= max(&loose));
        assert!(tight.len() >= loose.len());
        assert!((tight.iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }
}
