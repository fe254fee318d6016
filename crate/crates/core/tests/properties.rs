//! Randomized invariants across the crate.

use std::f64::consts::FRAC_1_SQRT_2;

use proptest::prelude::*;
use qbc_core::attack::{self, BranchStates, OracleConfig};
use qbc_core::linalg::{self, ComplexMatrix};
use qbc_core::protocol::{self, FamilyParams, ProtocolBranch, ProtocolSpec};
use qbc_core::qstate::{self, StateVector, SystemLayout, DENSITY_TOL};
use qbc_core::{protofile, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn to_nalgebra(a: &ComplexMatrix) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // pin the sum to exactly 1 within rounding
    let rest: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - rest;
    w
}

fn random_spec(rng: &mut impl Rng, branches: usize) -> ProtocolSpec {
    let layout = SystemLayout::bipartite(rng.gen_range(1..=3), rng.gen_range(1..=3)).unwrap();
    let bs = (0..branches)
        .map(|k| ProtocolBranch {
            omega_label: format!("w{k}"),
            psi0: StateVector::random(layout, rng),
            psi1: StateVector::random(layout, rng),
        })
        .collect();
    ProtocolSpec::new("random", layout, bs, random_weights(rng, branches), Default::default()).unwrap()
}

#[test]
fn svd_reconstruction_and_orthonormality() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..500 {
        let (m, n) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a = random_matrix(&mut rng, m, n);
        let s = linalg::svd(&a).unwrap();
        let k = m.min(n);
        let err = (&s.reconstruct() - &a).frobenius_norm();
        assert!(err <= 1e-9 * a.frobenius_norm().max(1.0), "{m}x{n}: {err}");
        assert!((&s.left.adjoint() * &s.left).max_abs_diff(&ComplexMatrix::identity(k)) < 1e-10);
        assert!((&s.right_adjoint * &s.right_adjoint.adjoint()).max_abs_diff(&ComplexMatrix::identity(k)) < 1e-10);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.singular_values.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn svd_converges_on_low_rank_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    for _ in 0..500 {
        let (m, n, r) = (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=3));
        let a = &random_matrix(&mut rng, m, r) * &random_matrix(&mut rng, r, n);
        let s = linalg::svd(&a).unwrap();
        assert!((&s.reconstruct() - &a).frobenius_norm() <= 1e-9 * a.frobenius_norm().max(1.0));
        assert!(s.rank(1e-9) <= r);
    }
}

#[test]
fn svd_agrees_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_matrix(&mut rng, m, n);
        let ours = linalg::svd(&a).unwrap().singular_values;
        let mut theirs: Vec<f64> = to_nalgebra(&a).singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn herm_eig_agrees_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let g = random_matrix(&mut rng, n, n);
        let h = &g + &g.adjoint();
        let (ours, _) = linalg::herm_eig(&h).unwrap();
        let mut theirs: Vec<f64> = to_nalgebra(&h).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn trace_norm_is_unitarily_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let a = random_matrix(&mut rng, n, n);
        let u = linalg::haar_unitary(n, &mut rng);
        let v = linalg::haar_unitary(n, &mut rng);
        let base = linalg::trace_norm(&a).unwrap();
        let moved = linalg::trace_norm(&(&(&u * &a) * &v)).unwrap();
        assert!((base - moved).abs() <= 1e-9);
    }
}

#[test]
fn trace_norm_dominates_random_unitary_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let a = random_matrix(&mut rng, 4, 4);
    let tn = linalg::trace_norm(&a).unwrap();
    let mut best: f64 = 0.0;
    for _ in 0..10_000 {
        let u = linalg::haar_unitary(4, &mut rng);
        best = best.max((&u * &a).trace().norm());
    }
    assert!(best <= tn + 1e-7);
    assert!(best > 0.5 * tn);
}

#[test]
fn psd_sqrt_fixes_projectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(0..=n);
        let u = linalg::haar_unitary(n, &mut rng);
        let cols: Vec<usize> = (0..k).collect();
        let p = ComplexMatrix::from_fn(n, n, |i, j| cols.iter().map(|&c| u[(i, c)] * u[(j, c)].conj()).sum());
        let r = linalg::psd_sqrt(&p).unwrap();
        assert!(r.max_abs_diff(&p) <= 1e-9, "n={n} k={k} diff={}", r.max_abs_diff(&p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(seed in any::<u64>(), dims in prop::array::uniform6(1usize..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, dims[0], dims[1]);
        let b = random_matrix(&mut rng, dims[2], dims[3]);
        let c = random_matrix(&mut rng, dims[4], dims[5]);
        let left = linalg::kron(&linalg::kron(&a, &b).unwrap(), &c).unwrap();
        let right = linalg::kron(&a, &linalg::kron(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left.shape(), right.shape());
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn alice_unitaries_preserve_bob_state(seed in any::<u64>(), da in 1usize..5, db in 1usize..4, dl in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = SystemLayout::new(da, db, dl).unwrap();
        let psi = StateVector::random(layout, &mut rng);
        let u = linalg::haar_unitary(da, &mut rng);
        let r0 = qstate::partial_trace_alice(&psi);
        let r1 = qstate::partial_trace_alice(&qstate::apply_alice_unitary(&psi, &u).unwrap());
        prop_assert!((qstate::fidelity(&r0, &r1).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn canonical_form_round_trips(seed in any::<u64>(), branches in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, branches);
        let text = protofile::serialize(&spec);
        let parsed = protofile::parse(&text).unwrap();
        prop_assert!(parsed.warnings.is_empty());
        prop_assert_eq!(&parsed.spec, &spec);
        prop_assert_eq!(protofile::serialize(&parsed.spec), text);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = protofile::parse_bytes(&bytes);
    }

    #[test]
    fn mutated_documents_never_panic(seed in any::<u64>(), cut in 0usize..2000, byte in any::<u8>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut text = protofile::serialize(&random_spec(&mut rng, 2)).into_bytes();
        let at = cut % text.len();
        text[at] = byte;
        if let Err(e) = protofile::parse_bytes(&text) {
            prop_assert!(e.position.line >= 1 && e.position.column >= 1);
        }
    }
}

#[test]
fn partial_trace_always_yields_density_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..500 {
        let layout = SystemLayout::new(rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4)).unwrap();
        let rho = qstate::partial_trace_alice(&StateVector::random(layout, &mut rng));
        rho.validate(DENSITY_TOL).unwrap();
        assert_eq!(rho.dim(), layout.bob_dim());
    }
}

#[test]
fn closed_form_saturates_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..200 {
        let layout = SystemLayout::new(rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=2)).unwrap();
        let psi0 = StateVector::random(layout, &mut rng);
        let psi1 = StateVector::random(layout, &mut rng);
        let plan = attack::optimal_cheat_unitary(&psi0, &psi1).unwrap();
        let f = qstate::fidelity(&qstate::partial_trace_alice(&psi0), &qstate::partial_trace_alice(&psi1)).unwrap();
        assert!((plan.achieved_overlap - f).abs() <= 1e-8);
        let tn = linalg::trace_norm(&attack::cross_gram(&psi0, &psi1).unwrap()).unwrap();
        assert!((plan.achieved_overlap - tn).abs() <= 1e-9);
        assert!(plan.unitary.is_unitary(1e-9));
        assert!((plan.success_probability - plan.achieved_overlap.powi(2)).abs() <= 1e-12);
    }
}

#[test]
fn oracle_never_beats_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for seed in 0..10 {
        let layout = SystemLayout::bipartite(rng.gen_range(1..=3), rng.gen_range(1..=3)).unwrap();
        let psi0 = StateVector::random(layout, &mut rng);
        let psi1 = StateVector::random(layout, &mut rng);
        let closed = attack::optimal_cheat_unitary(&psi0, &psi1).unwrap();
        let cfg = OracleConfig { samples: 500, refine_steps: 50, seed };
        let found = attack::brute_force_unitary_oracle(&psi0, &psi1, cfg).unwrap();
        assert!(found.achieved_overlap <= closed.achieved_overlap + 1e-7);
    }
}

#[test]
fn common_unitary_bound_and_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let spec = random_spec(&mut rng, n);
        let (big0, big1) = protocol::entangle_choices(&spec).unwrap();
        let states: Vec<BranchStates<'_>> = spec
            .branches()
            .iter()
            .zip(spec.weights())
            .map(|(b, &w)| BranchStates { label: &b.omega_label, psi0: &b.psi0, psi1: &b.psi1, weight: w })
            .collect();
        let r = attack::common_cheat_unitary(&big0, &big1, &states).unwrap();
        let deltas: Vec<f64> = r.diagnostics.iter().map(|d| d.delta).collect();
        assert!(attack::delta_bound_check(spec.weights(), &deltas, r.epsilon_tilde).unwrap() >= -1e-9);
        for d in &r.diagnostics {
            assert!(d.delta >= d.epsilon_solo - 1e-9);
        }
    }
}

#[test]
fn entangled_branches_are_recoverable() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for _ in 0..50 {
        let spec = random_spec(&mut rng, 3);
        let (big0, big1) = protocol::entangle_choices(&spec).unwrap();
        assert!((big0.norm() - 1.0).abs() <= 1e-12 && (big1.norm() - 1.0).abs() <= 1e-12);
        let layout = spec.layout();
        for (i, br) in spec.branches().iter().enumerate() {
            for (big, small) in [(&big0, &br.psi0), (&big1, &br.psi1)] {
                let amps: Vec<Complex64> = (0..layout.dim_a())
                    .flat_map(|a| (0..layout.dim_b()).map(move |b| (a, b)))
                    .map(|(a, b)| big.amplitude(a, b, i))
                    .collect();
                let projected = StateVector::normalized(layout, amps).unwrap();
                assert!(projected.same_ray(small, 1e-10));
            }
        }
    }
}

#[test]
fn perfect_family_is_omega_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    for _ in 0..20 {
        let k = rng.gen_range(2..=4);
        let angles: Vec<String> = (0..k).map(|_| rng.gen_range(-3.0..3.0f64).to_string()).collect();
        let weights: Vec<String> = random_weights(&mut rng, k).iter().map(|w| w.to_string()).collect();
        let mut params = FamilyParams::new();
        params.insert("angles".into(), angles.join(","));
        params.insert("weights".into(), weights.join(","));
        let spec = protocol::family_instantiate("perfect_secret_basis", &params).unwrap();
        let conceal = protocol::concealing_report(&spec).unwrap();
        assert!(conceal.per_branch.iter().all(|b| (b.fidelity - 1.0).abs() <= 1e-9));
        assert!(conceal.epsilon <= 1e-9);
        let binding = protocol::binding_report(&spec).unwrap();
        assert!(binding.diagnostics.iter().all(|d| d.delta <= 1e-8));
        for br in spec.branches() {
            let o = attack::attack_overlap(&br.psi0, &br.psi1, &binding.common.unitary).unwrap();
            assert!(o >= 1.0 - 1e-8);
        }
    }
}

#[test]
fn counterexample_breaks_concealing_for_every_p() {
    for p in [0.01f64, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
        let mut params = FamilyParams::new();
        params.insert("p".into(), p.to_string());
        let spec = protocol::family_instantiate("omega_dependent_counterexample", &params).unwrap();
        let r = protocol::concealing_report(&spec).unwrap();
        let m = f64::min(p, 1.0 - p);
        assert!(r.entangled_fidelity < 1.0 - m / 4.0, "p = {p}");
        // analytic value: sqrt(p² + (1 − p)²)
        assert!((r.entangled_fidelity - (p * p + (1.0 - p) * (1.0 - p)).sqrt()).abs() <= 1e-9);
    }
    let spec = protocol::family_instantiate("omega_dependent_counterexample", &FamilyParams::new()).unwrap();
    let r = protocol::concealing_report(&spec).unwrap();
    assert!(r.entangled_fidelity <= 1.0 - 0.29);
    assert!((r.entangled_fidelity - FRAC_1_SQRT_2).abs() <= 1e-12);
}

#[test]
fn imperfect_sweep_is_monotone() {
    let mut params = FamilyParams::new();
    params.insert("theta0".into(), "1.3".into());
    let pts = protocol::sweep("imperfect_theta", &params, &[1, 2, 3, 5, 8, 13, 21, 34]).unwrap();
    assert!(pts.windows(2).all(|w| w[1].epsilon < w[0].epsilon));
    assert!(pts.windows(2).all(|w| w[1].cheat_probability > w[0].cheat_probability));
}
