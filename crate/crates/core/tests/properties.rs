use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use trajphase::dephasing::{bloch_spiral, gamma_nj_closed_form, DephasingParams};
use trajphase::jump::{
    gauge_transform_check, no_jump_geometric_phase, no_jump_hamiltonian, propagate_no_jump,
    shifted_no_jump_hamiltonian, GaugeFactor,
};
use trajphase::lindblad::{
    apply_shift, apply_unitary_mixing, generator_difference, induced_hamiltonian, LindbladModel, ShiftSet,
};
use trajphase::numerics::canonical_phase;
use trajphase::operators::{BlochAngles, Operator, PureState};
use trajphase::C64;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn operator() -> impl Strategy<Value = Operator> {
    prop::collection::vec(complex(), 4)
        .prop_map(|v| Operator::from_matrix(DMatrix::from_row_slice(2, 2, &v)).unwrap())
}

fn hermitian() -> impl Strategy<Value = Operator> {
    operator().prop_map(|a| a.hermitian_part())
}

fn model() -> impl Strategy<Value = LindbladModel> {
    (hermitian(), prop::collection::vec(operator(), 1..=3), 0.0..1.5f64)
        .prop_map(|(h, ls, lambda)| LindbladModel::constant(h, ls, lambda).unwrap())
}

fn model_and_shifts() -> impl Strategy<Value = (LindbladModel, ShiftSet)> {
    model().prop_flat_map(|m| {
        let n = m.channels();
        (Just(m), prop::collection::vec(complex(), n).prop_map(|f| ShiftSet::constant(&f)))
    })
}

fn state() -> impl Strategy<Value = PureState> {
    (0.0..=PI, 0.0..2.0 * PI).prop_map(|(t, p)| PureState::from_bloch(BlochAngles::new(t, p).unwrap()))
}

/// A random unitary `exp(i A)` with Hermitian `A`.
fn unitary(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec(complex(), n * n).prop_map(move |v| {
        let a = Operator::from_matrix(DMatrix::from_row_slice(n, n, &v)).unwrap().hermitian_part();
        a.scale(C64::new(0.0, 1.0)).exp().into_matrix()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_generator_two_ways((m, s) in model_and_shifts()) {
        let a = shifted_no_jump_hamiltonian(&m, &s).unwrap();
        let b = no_jump_hamiltonian(&apply_shift(&m, &s).unwrap()).unwrap();
        prop_assert!(a.schedule().values()[0].distance(&b.schedule().values()[0]) < 1e-12);
    }

    #[test]
    fn shifted_generator_is_dissipative((m, s) in model_and_shifts()) {
        let k = shifted_no_jump_hamiltonian(&m, &s).unwrap();
        let top = *k.skew_part().values()[0].hermitian_eigenvalues().last().unwrap();
        prop_assert!(top <= 1e-12);
    }

    #[test]
    fn induced_hamiltonian_reproduces_shifted_channels((m, s) in model_and_shifts()) {
        let with_k = m.with_hamiltonian(induced_hamiltonian(&m, &s).unwrap()).unwrap();
        let shifted = apply_shift(&m, &s).unwrap();
        prop_assert!(generator_difference(&with_k, &shifted, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn mixing_leaves_no_jump_generator_unchanged(
        (m, v) in model().prop_flat_map(|m| { let n = m.channels(); (Just(m), unitary(n)) })
    ) {
        let mixed = apply_unitary_mixing(&m, &v).unwrap();
        let a = no_jump_hamiltonian(&m).unwrap();
        let b = no_jump_hamiltonian(&mixed).unwrap();
        prop_assert!(a.schedule().values()[0].distance(&b.schedule().values()[0]) < 1e-12);
        prop_assert!(generator_difference(&m, &mixed, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn unshifted_norm_never_grows(m in model(), psi in state()) {
        let rec = propagate_no_jump(&no_jump_hamiltonian(&m).unwrap(), &psi, 3.0, 120).unwrap();
        for w in rec.states.windows(2) {
            prop_assert!(w[1].norm() <= w[0].norm() * (1.0 + 1e-12));
        }
        prop_assert!(rec.survival <= 1.0 + 1e-12);
    }

    #[test]
    fn gauge_invariance(
        (m, s) in model_and_shifts(),
        psi in state(),
        a in -0.5..0.5f64,
        b in -2.0..2.0f64,
    ) {
        let gauge = GaugeFactor::exponential(C64::new(a, b));
        let res = gauge_transform_check(&m, Some(&s), &psi, 2.0, 512, &gauge);
        // paths that end orthogonal to the start have no phase
        if let Ok((x, y)) = res {
            prop_assert!((x.gamma - y.gamma).abs() <= 1e-8, "{} vs {}", x.gamma, y.gamma);
        }
    }

    #[test]
    fn closed_form_agrees_with_propagation(
        f in -2.0..2.0f64,
        lambda in 0.0..1.0f64,
        theta0 in 0.05..(PI - 0.05),
    ) {
        let p = DephasingParams::new(1.0, lambda, f, theta0).unwrap();
        let r = no_jump_geometric_phase(&p.model(), Some(&p.shifts()), &p.initial_state(), p.period(), 4096).unwrap();
        prop_assert!((r.gamma - gamma_nj_closed_form(&p)).abs() < 1e-6);
        prop_assert!(r.gamma <= 1e-9 && r.gamma > -2.0 * PI);
    }

    #[test]
    fn spiral_tracks_propagation(
        f in -1.0..1.0f64,
        lambda in 0.0..1.0f64,
        theta0 in 0.05..(PI - 0.05),
        t in 0.0..6.0f64,
    ) {
        let p = DephasingParams::new(1.0, lambda, f, theta0).unwrap();
        let gen = shifted_no_jump_hamiltonian(&p.model(), &p.shifts()).unwrap();
        let rec = propagate_no_jump(&gen, &p.initial_state(), t.max(1e-3), 8).unwrap();
        let got = rec.final_state().to_bloch().unwrap();
        let want = bloch_spiral(&p, t.max(1e-3));
        prop_assert!((got.theta - want.theta).abs() < 1e-8);
    }

    #[test]
    fn canonical_phase_range(x in -100.0..100.0f64) {
        let y = canonical_phase(x);
        prop_assert!(y > -2.0 * PI && y <= 1e-9);
        let k = (x - y) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn bloch_round_trip(theta in 0.01..(PI - 0.01), phi in 0.0..(2.0 * PI - 1e-6)) {
        let b = PureState::from_bloch(BlochAngles::new(theta, phi).unwrap()).to_bloch().unwrap();
        prop_assert!((b.theta - theta).abs() < 1e-12);
        prop_assert!((b.phi - phi).abs() < 1e-9);
    }
}
