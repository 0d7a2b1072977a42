//! The five experiment commands. Each returns its output in memory; writing
//! files is left to the caller.

use rayon::prelude::*;
use serde::Serialize;
use trajphase::dephasing::{
    dynamical_term_dephasing, gamma_nj_closed_form, qsd_overlap_closed_form, DephasingParams,
};
use trajphase::jump::{average_jump_ensemble, no_jump_geometric_phase, EnsembleConfig};
use trajphase::lindblad::{
    apply_shift, evolve_density, generator_difference, hidden_channels, induced_hamiltonian, DensityMatrix,
    LindbladModel, ShiftSet,
};
use trajphase::numerics::simpson;
use trajphase::qsd::{averaged_geometric_phase, QsdConfig};
use trajphase::{Error, C64};

use crate::config::{Scenario, ScenarioConfig, SweepParam};
use crate::error::{CliError, ConfigError};
use crate::output::{density_cells, density_columns, Cell, Table};

/// Tolerance on the density-matrix residual for a shift to count as
/// unobservable.
pub const RHO_RESIDUAL_TOL: f64 = 1e-8;

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    /// Main CSV table or JSON document.
    pub primary: String,
    /// Companion files as `(suffix, contents)`, written next to the primary.
    pub extra: Vec<(&'static str, String)>,
    /// Human-readable summary for the terminal.
    pub message: Option<String>,
}

fn single_point(cfg: &ScenarioConfig, command: &str) -> Result<Scenario, CliError> {
    if !cfg.sweep.is_empty() {
        return Err(ConfigError::Invalid {
            field: "sweep".into(),
            message: format!("{command} runs a single point; remove the sweep table"),
        }
        .into());
    }
    Ok(cfg.resolve(&[])?)
}

fn shifted_model(s: &Scenario) -> Result<LindbladModel, Error> {
    match &s.shifts {
        Some(f) => apply_shift(&s.model, f),
        None => Ok(s.model.clone()),
    }
}

fn status(e: &Error) -> &'static str {
    match e {
        Error::BranchTracking { .. } => "branch_tracking",
        Error::TotalDecay { .. } => "total_decay",
        Error::StepTooLarge { .. } => "step_too_large",
        _ => "failed",
    }
}

/// Dephasing parameters when the scenario runs over exactly one period, where
/// the closed form for the no-jump phase applies.
fn one_period(s: &Scenario) -> Option<DephasingParams> {
    s.dephasing.filter(|p| (s.t_final - p.period()).abs() <= 1e-12 * p.period())
}

/// `t` and the independent entries of `rho(t)` on the integration grid.
pub fn evolve(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let s = single_point(cfg, "evolve")?;
    let m = shifted_model(&s)?;
    let path = evolve_density(&m, &DensityMatrix::from_pure(&s.psi0)?, s.t_final, s.steps)?;
    let mut table = Table::new(std::iter::once("t".to_string()).chain(density_columns(m.dim())));
    for (t, rho) in &path {
        let mut row = vec![Cell::Num(*t)];
        row.extend(density_cells(rho.operator()));
        table.push(row);
    }
    Ok(CommandOutput {
        primary: table.to_csv(),
        ..Default::default()
    })
}

fn swept_columns(cfg: &ScenarioConfig) -> Result<Vec<SweepParam>, ConfigError> {
    Ok(cfg.sweep_axes()?.into_iter().map(|(p, _)| p).collect())
}

/// One row per sweep point with the no-jump geometric phase and its parts.
/// A point whose phase cannot be computed is flagged in `status`.
pub fn nojump_phase(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let params = swept_columns(cfg)?;
    let points = cfg.sweep_points()?;
    let scenarios = points.iter().map(|p| cfg.resolve(p)).collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(params.iter().map(|p| p.name().to_string()).chain(
        ["gamma_nj", "overlap_arg", "dynamical_term", "survival", "closed_form", "status"].map(String::from),
    ));
    let rows: Vec<Vec<Cell>> = scenarios
        .par_iter()
        .zip(points.par_iter())
        .enumerate()
        .map(|(i, (s, point))| {
            let mut row: Vec<Cell> = point.iter().map(|(_, v)| Cell::Num(*v)).collect();
            let closed = one_period(s).map(|p| gamma_nj_closed_form(&p));
            match no_jump_geometric_phase(&s.model, s.shifts.as_ref(), &s.psi0, s.t_final, s.steps) {
                Ok(r) => {
                    row.extend([
                        r.gamma.into(),
                        r.overlap_arg.into(),
                        r.dynamical_term.into(),
                        (r.final_norm * r.final_norm).into(),
                        closed.into(),
                        "ok".into(),
                    ]);
                }
                Err(e) => {
                    log::warn!("sweep point {i}: {e}");
                    row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, closed.into(), status(&e).into()]);
                }
            }
            row
        })
        .collect();
    let failed = rows
        .iter()
        .filter(|r| !matches!(r.last(), Some(Cell::Text(t)) if t == "ok"))
        .count();
    for row in rows {
        table.push(row);
    }
    Ok(CommandOutput {
        primary: table.to_csv(),
        message: Some(format!("{} points, {failed} flagged", table.len())),
        ..Default::default()
    })
}

/// Per-trajectory records, the ensemble density at the checkpoints against
/// the master equation, and a one-row summary.
pub fn jump_sample(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let s = single_point(cfg, "jump-sample")?;
    let ens = average_jump_ensemble(
        &s.model,
        s.shifts.as_ref(),
        &s.psi0,
        &EnsembleConfig {
            t_final: s.t_final,
            delta_t: s.delta_t,
            n_trajectories: s.n_trajectories,
            seed: s.seed,
            checkpoints: s.checkpoints,
        },
    )?;
    let d = s.model.dim();

    let mut cols: Vec<String> = ["trajectory", "jumps", "first_jump", "survival"].map(String::from).to_vec();
    for k in 0..d {
        cols.push(format!("re_psi{k}"));
        cols.push(format!("im_psi{k}"));
    }
    let mut per_traj = Table::new(cols);
    for (i, tr) in ens.trajectories.iter().enumerate() {
        let mut row = vec![i.into(), tr.jumps.into(), tr.first_jump.into(), tr.survival.into()];
        for z in tr.final_state.amplitudes() {
            row.extend([Cell::Num(z.re), Cell::Num(z.im)]);
        }
        per_traj.push(row);
    }

    // master-equation reference for the unraveled (shifted) model
    let m = shifted_model(&s)?;
    let rho0 = DensityMatrix::from_pure(&s.psi0)?;
    let mut ensemble = Table::new(
        std::iter::once("t".to_string())
            .chain(density_columns(d))
            .chain(["max_std_error", "max_deviation"].map(String::from)),
    );
    let mut final_dev = 0.0;
    for snap in &ens.snapshots {
        let reference = if snap.time == 0.0 {
            rho0.clone()
        } else {
            let steps = ((s.steps as f64 * snap.time / s.t_final).ceil() as usize).max(1);
            evolve_density(&m, &rho0, snap.time, steps)?.pop().expect("non-empty path").1
        };
        final_dev = snap.rho.distance(reference.operator());
        let mut row = vec![Cell::Num(snap.time)];
        row.extend(density_cells(&snap.rho));
        row.extend([snap.max_std_error().into(), final_dev.into()]);
        ensemble.push(row);
    }

    // expected jump count: lambda int_0^T Tr[sum L^dag L rho] dt
    let path = evolve_density(&m, &rho0, s.t_final, s.steps)?;
    let rates = path
        .iter()
        .map(|(t, rho)| Ok(m.strength() * rho.expectation(&m.jump_rate_operator(*t)?).re))
        .collect::<Result<Vec<f64>, Error>>()?;
    let expected = simpson(&rates, s.t_final / s.steps as f64);

    let se = ens.final_snapshot().max_std_error();
    let mut summary = Table::new([
        "t_final",
        "n_trajectories",
        "mean_jumps",
        "jump_std_error",
        "expected_jumps",
        "max_deviation",
        "max_std_error",
        "within_3se",
    ]);
    let within = final_dev <= 3.0 * se;
    summary.push(vec![
        s.t_final.into(),
        s.n_trajectories.into(),
        ens.mean_jumps.into(),
        ens.jump_std_error.into(),
        expected.into(),
        final_dev.into(),
        se.into(),
        (if within { "yes" } else { "no" }).into(),
    ]);
    if !within {
        log::warn!("ensemble density deviates from the master equation by {final_dev:e} > 3 SE ({se:e})");
    }
    Ok(CommandOutput {
        primary: per_traj.to_csv(),
        extra: vec![("ensemble.csv", ensemble.to_csv()), ("summary.csv", summary.to_csv())],
        message: Some(format!(
            "{} trajectories: mean jumps {:.4} +- {:.4} (expected {:.4}); max |rho_est - rho| = {:.3e} (SE {:.3e})",
            s.n_trajectories, ens.mean_jumps, ens.jump_std_error, expected, final_dev, se
        )),
    })
}

/// One row per sweep point with the averaged geometric phase of the linear
/// QSD ensemble.
pub fn qsd_phase(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let params = swept_columns(cfg)?;
    let points = cfg.sweep_points()?;
    let scenarios = points.iter().map(|p| cfg.resolve(p)).collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(params.iter().map(|p| p.name().to_string()).chain(
        [
            "alpha_g",
            "tracked_arg",
            "dynamical_term",
            "arg_std_error",
            "re_mean_overlap",
            "im_mean_overlap",
            "n_used",
            "excluded",
            "closed_form_arg",
            "closed_form_dynamical",
            "status",
        ]
        .map(String::from),
    ));
    for (i, (s, point)) in scenarios.iter().zip(&points).enumerate() {
        let mut row: Vec<Cell> = point.iter().map(|(_, v)| Cell::Num(*v)).collect();
        let closed = s.dephasing.map(|p| (qsd_overlap_closed_form(&p, s.t_final), dynamical_term_dephasing(&p, s.t_final)));
        let qcfg = QsdConfig {
            delta_t: s.delta_t,
            n_trajectories: s.n_trajectories,
            seed: s.seed,
            t_final: s.t_final,
        };
        match averaged_geometric_phase(&s.model, s.shifts.as_ref(), &s.psi0, &qcfg) {
            Ok(r) => {
                if r.excluded > 0 {
                    log::warn!("sweep point {i}: {} trajectories excluded by the norm guard", r.excluded);
                }
                row.extend([
                    r.alpha_g.into(),
                    r.tracked_arg.into(),
                    r.dynamical_term.into(),
                    r.arg_std_error.into(),
                    r.mean_overlap.re.into(),
                    r.mean_overlap.im.into(),
                    r.n_used.into(),
                    r.excluded.into(),
                    closed.map(|c| c.0).into(),
                    closed.map(|c| c.1).into(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                log::warn!("sweep point {i}: {e}");
                row.extend(std::iter::repeat_n(Cell::Empty, 8));
                row.extend([closed.map(|c| c.0).into(), closed.map(|c| c.1).into(), status(&e).into()]);
            }
        }
        table.push(row);
    }
    Ok(CommandOutput {
        primary: table.to_csv(),
        message: Some(format!("{} points", table.len())),
        ..Default::default()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub hidden: bool,
    pub hidden_channels: Vec<bool>,
    pub shifts_zero: bool,
    /// Max-entry distance between the shifted and unshifted `rho(T)`.
    pub rho_residual: f64,
    pub generator_difference: f64,
    pub gamma_nj_unshifted: Option<f64>,
    pub gamma_nj_shifted: Option<f64>,
    pub gamma_nj_shift: Option<f64>,
    /// Largest entry of `K - H` at `t = 0`.
    pub hamiltonian_change: f64,
    /// `(bx, by, bz)` with `K - H = bx sx + by sy + bz sz + c` for qubits.
    pub zeeman_field: Option<[f64; 3]>,
    pub verdict: String,
}

fn phase_or_warn(label: &str, r: trajphase::Result<f64>) -> Option<f64> {
    r.map_err(|e| log::warn!("{label} no-jump phase: {e}")).ok()
}

/// Is the configured shift hidden, and what does it change?
pub fn symmetry_check(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let s = single_point(cfg, "symmetry-check")?;
    let shifts = s
        .shifts
        .clone()
        .unwrap_or_else(|| ShiftSet::constant(&vec![C64::new(0.0, 0.0); s.model.channels()]));
    let channels = hidden_channels(&s.model, &shifts, 1e-12)?;
    let hidden = channels.iter().all(|h| *h);
    let shifts_zero = shifts.shifts().iter().all(|f| f.values().iter().all(|z| *z == C64::new(0.0, 0.0)));

    let shifted = apply_shift(&s.model, &shifts)?;
    let rho0 = DensityMatrix::from_pure(&s.psi0)?;
    let a = evolve_density(&s.model, &rho0, s.t_final, s.steps)?;
    let b = evolve_density(&shifted, &rho0, s.t_final, s.steps)?;
    let rho_residual = a.last().expect("non-empty").1.operator().distance(b.last().expect("non-empty").1.operator());
    let gen_diff = generator_difference(&s.model, &shifted, 0.0)?;

    let g0 = phase_or_warn(
        "unshifted",
        no_jump_geometric_phase(&s.model, None, &s.psi0, s.t_final, s.steps).map(|r| r.gamma),
    );
    let g1 = phase_or_warn(
        "shifted",
        no_jump_geometric_phase(&s.model, Some(&shifts), &s.psi0, s.t_final, s.steps).map(|r| r.gamma),
    );
    let dg = g0.zip(g1).map(|(x, y)| y - x);

    let k = induced_hamiltonian(&s.model, &shifts)?;
    let delta = k.at(0.0)? - s.model.hamiltonian().at(0.0)?;
    let zeeman = (delta.dim() == 2).then(|| {
        let off = delta.get(0, 1);
        [off.re, -off.im, 0.5 * (delta.get(0, 0) - delta.get(1, 1)).re]
    });

    let verdict = if shifts_zero {
        "hidden: yes; no observable differences".to_string()
    } else if hidden {
        let rel = if rho_residual <= RHO_RESIDUAL_TOL { "<=" } else { ">" };
        let dg = dg.map_or("unavailable".to_string(), |x| format!("{x:.10}"));
        format!("hidden: yes; rho residual {rho_residual:.3e} {rel} 1e-8; gamma_nj shift = {dg}")
    } else {
        match zeeman {
            Some([x, y, z]) => format!(
                "hidden: no; Hamiltonian gains Zeeman term {x:.6} sx {y:+.6} sy {z:+.6} sz; rho residual {rho_residual:.3e}"
            ),
            None => format!(
                "hidden: no; Hamiltonian gains a term of size {:.6e}; rho residual {rho_residual:.3e}",
                delta.max_abs()
            ),
        }
    };
    let report = SymmetryReport {
        hidden,
        hidden_channels: channels,
        shifts_zero,
        rho_residual,
        generator_difference: gen_diff,
        gamma_nj_unshifted: g0,
        gamma_nj_shifted: g1,
        gamma_nj_shift: dg,
        hamiltonian_change: delta.max_abs(),
        zeeman_field: zeeman,
        verdict: verdict.clone(),
    };
    Ok(CommandOutput {
        primary: serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        extra: Vec::new(),
        message: Some(verdict),
    })
}
