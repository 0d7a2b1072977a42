//! A shift of the dephasing channel that leaves the density matrix alone but
//! moves the no-jump geometric phase.

use std::f64::consts::PI;

use trajphase::dephasing::{gamma_nj_closed_form, DephasingParams};
use trajphase::jump::no_jump_geometric_phase;
use trajphase::lindblad::{apply_shift, evolve_density, shift_is_hidden, DensityMatrix};

#[test]
fn density_unchanged_phase_moved() {
    let p = DephasingParams::new(1.0, 0.5, 0.2, PI / 2.0).unwrap();
    let base = DephasingParams { f: 0.0, ..p };
    let model = p.model();
    let shifts = p.shifts();
    assert!(shift_is_hidden(&model, &shifts, 1e-12).unwrap());

    let rho0 = DensityMatrix::from_pure(&p.initial_state()).unwrap();
    let a = evolve_density(&model, &rho0, p.period(), 4096).unwrap();
    let b = evolve_density(&apply_shift(&model, &shifts).unwrap(), &rho0, p.period(), 4096).unwrap();
    let residual = a.last().unwrap().1.operator().distance(b.last().unwrap().1.operator());
    assert!(residual <= 1e-8, "{residual}");

    let g0 = no_jump_geometric_phase(&model, None, &p.initial_state(), p.period(), 4096).unwrap();
    let g1 = no_jump_geometric_phase(&model, Some(&shifts), &p.initial_state(), p.period(), 4096).unwrap();
    assert!((g1.gamma - g0.gamma).abs() >= 1e-3);
    assert!((g0.gamma - gamma_nj_closed_form(&base)).abs() < 1e-6);
    assert!((g1.gamma - gamma_nj_closed_form(&p)).abs() < 1e-6);
}

#[test]
fn phase_is_flat_in_lambda_without_shift() {
    let values: Vec<f64> = (0..=10)
        .map(|k| {
            let p = DephasingParams::new(1.0, 0.1 * k as f64, 0.0, PI / 2.0).unwrap();
            no_jump_geometric_phase(&p.model(), None, &p.initial_state(), p.period(), 4096)
                .unwrap()
                .gamma
        })
        .collect();
    for g in &values {
        assert!((g + PI).abs() <= 1e-6, "{g}");
    }
}
