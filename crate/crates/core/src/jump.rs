//! Quantum-jump unraveling and no-jump geometric phases.
//!
//! Between jumps a trajectory follows the non-Hermitian generator
//! `K~(t) = H(t) - (i lambda/2) sum_m L_m^dag L_m`. The geometric phase of a
//! path `psi(t)` on `[0, T]` is
//!
//! ```text
//! gamma = arg <psi(0)|psi(T)> + int_0^T <psi|H|psi> / <psi|psi> dt
//! ```
//!
//! where `H` is the Hermitian part of the generator. It depends only on the
//! ray of `psi(t)`, which [`gauge_transform_check`] verifies numerically.
//!
//! The Kraus helpers reproduce the bookkeeping of one monitoring interval
//! `dt`: the unshifted set `E`, the shifted set `F`, and the channel-space
//! matrix `W` with `F = W E` to first order in `dt` and `sqrt(lambda dt)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::lindblad::{apply_shift, shift_is_hidden, DensityMatrix, LindbladModel, ShiftSet};
use crate::numerics::{canonical_phase, simpson, ComplexMoments, PhaseTracker};
use crate::operators::{matvec_into, MidpointStepper, Operator, OperatorSchedule, PureState, Schedule};
use crate::rng::trajectory_rng;
use crate::{Error, Result, C64};

/// Overlaps smaller than this (relative to the norms) have no usable phase.
pub const ZERO_OVERLAP: f64 = 1e-10;
/// Norms below this count as total decay.
pub const NORM_UNDERFLOW: f64 = 1e-150;
/// Largest phase increment per step accepted by the branch tracker.
pub const MAX_STEP_ROTATION: f64 = PI / 2.0;
const MAX_REFINEMENTS: usize = 8;

/// The effective non-Hermitian generator of no-jump evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct NoJumpGenerator {
    generator: OperatorSchedule,
}

impl NoJumpGenerator {
    pub fn new(generator: OperatorSchedule) -> Self {
        Self { generator }
    }

    pub fn schedule(&self) -> &OperatorSchedule {
        &self.generator
    }

    pub fn dim(&self) -> Result<usize> {
        self.generator.dim()
    }

    /// The Hamiltonian that drives the phase: Hermitian part of `K~`.
    pub fn hermitian_part(&self) -> OperatorSchedule {
        self.generator.map(Operator::hermitian_part)
    }

    /// The Hermitian `B(t)` in `K~ = hermitian_part + i B`.
    pub fn skew_part(&self) -> OperatorSchedule {
        self.generator.map(Operator::skew_part)
    }
}

/// `H(t) - (i lambda / 2) sum_m L_m^dag L_m`
pub fn no_jump_hamiltonian(model: &LindbladModel) -> Result<NoJumpGenerator> {
    let factor = C64::new(0.0, -0.5 * model.strength());
    let gen = Schedule::from_grid(model.grid()?, |t| {
        Ok(model.hamiltonian().at(t)? + &model.jump_rate_operator(t)?.scale(factor))
    })?;
    Ok(NoJumpGenerator::new(gen))
}

/// No-jump generator after the shifts `L_m -> L_m - f_m(t)`, built from the
/// unshifted one:
/// `K~ = H~ + (i lambda/2) sum_m (f_m L_m^dag + f_m^* L_m - |f_m|^2)`.
pub fn shifted_no_jump_hamiltonian(model: &LindbladModel, shifts: &ShiftSet) -> Result<NoJumpGenerator> {
    if shifts.len() != model.channels() {
        return Err(Error::ChannelMismatch {
            model: model.channels(),
            shifts: shifts.len(),
        });
    }
    let base = no_jump_hamiltonian(model)?;
    let grid = crate::operators::common_grid(
        std::iter::once(model.grid()?).chain(shifts.shifts().iter().map(|s| s.grid())),
    )?;
    let d = model.dim();
    let factor = C64::new(0.0, 0.5 * model.strength());
    let gen = Schedule::from_grid(grid, |t| {
        let mut k = base.schedule().at(t)?.clone();
        for (l, f) in model.lindblads().iter().zip(shifts.shifts()) {
            let (l, f) = (l.at(t)?, *f.at(t)?);
            let term = l.adjoint().scale(f) + l.scale(f.conj()) - Operator::identity(d).scale_real(f.norm_sqr());
            k += &term.scale(factor);
        }
        Ok(k)
    })?;
    Ok(NoJumpGenerator::new(gen))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: usize,
}

/// A sampled or deterministic trajectory.
///
/// No-jump records keep the unnormalized path; sampled jump trajectories are
/// renormalized after every step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    pub jumps: Vec<JumpEvent>,
    /// No-jump records: `<psi(T)|psi(T)> / <psi(0)|psi(0)>`. Sampled records:
    /// product of the no-jump probabilities of every step.
    pub survival: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &PureState {
        self.states.last().expect("records hold at least the initial state")
    }
}

/// Integrates `i d psi/dt = K~ psi` on `steps` uniform steps, each with the
/// exact exponential of the midpoint generator.
pub fn propagate_no_jump(
    gen: &NoJumpGenerator,
    psi0: &PureState,
    t_final: f64,
    steps: usize,
) -> Result<TrajectoryRecord> {
    if steps == 0 || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need steps >= 1 and t_final >= 0 (steps = {steps}, t_final = {t_final})"
        )));
    }
    let d = gen.dim()?;
    if psi0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: psi0.dim(),
        });
    }
    let n0 = psi0.norm_sqr();
    if !(n0 > 0.0) {
        return Err(Error::InvalidArgument("initial state has zero norm".into()));
    }
    if !gen.schedule().covers(0.0, t_final) {
        return Err(Error::Domain {
            t0: 0.0,
            t1: t_final,
            end: gen.schedule().end(),
        });
    }
    let h = t_final / steps as f64;
    let mut stepper = MidpointStepper::new(gen.schedule(), h);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(psi0.clone());
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for k in 0..steps {
        let t = k as f64 * h;
        let u = stepper.step(t)?;
        let mut next = states[k].clone();
        matvec_into(u.matrix(), states[k].amplitudes(), &mut buf);
        next.amplitudes_mut().copy_from_slice(&buf);
        if next.norm() < NORM_UNDERFLOW {
            return Err(Error::TotalDecay { time: t + h });
        }
        times.push((k + 1) as f64 * h);
        states.push(next);
    }
    let survival = states[steps].norm_sqr() / n0;
    Ok(TrajectoryRecord {
        times,
        states,
        jumps: Vec::new(),
        survival,
    })
}

/// Probability of the no-jump record: its final squared norm.
pub fn no_jump_probability(rec: &TrajectoryRecord) -> f64 {
    rec.final_state().norm_sqr()
}

/// Geometric phase of a path together with its two ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricPhaseResult {
    /// Continuously tracked `arg <psi(0)|psi(T)>`, offset by the multiple of
    /// 2 pi that puts `gamma` on the branch `(-2 pi, 0]`.
    pub overlap_arg: f64,
    pub dynamical_term: f64,
    /// `overlap_arg + dynamical_term`.
    pub gamma: f64,
    pub final_norm: f64,
    pub grid_steps: usize,
    /// Grid times where the overlap with the initial state (nearly) vanished.
    pub zero_crossings: Vec<f64>,
}

struct PhaseEval {
    result: GeometricPhaseResult,
    coarse: bool,
}

fn phase_from_path(
    times: &[f64],
    states: &[PureState],
    mut energy: impl FnMut(f64, &PureState) -> Result<f64>,
) -> Result<PhaseEval> {
    if times.len() != states.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(
            "path needs matching times and states with at least two points".into(),
        ));
    }
    let n = times.len() - 1;
    let h = (times[n] - times[0]) / n as f64;
    let psi0 = &states[0];
    let n0 = psi0.norm();
    let mut tracker = PhaseTracker::starting_at(0.0);
    tracker.push(psi0.inner(psi0));
    let mut zero_crossings = Vec::new();
    let mut coarse = false;
    let mut after_gap = false;
    for (k, psi) in states.iter().enumerate().skip(1) {
        let o = psi0.inner(psi);
        if o.norm() < ZERO_OVERLAP * n0 * psi.norm() {
            if k == n {
                return Err(Error::BranchTracking { time: times[k] });
            }
            zero_crossings.push(times[k]);
            after_gap = true;
            continue;
        }
        let inc = tracker.push(o);
        if inc.abs() > MAX_STEP_ROTATION && !after_gap {
            coarse = true;
        }
        after_gap = false;
    }
    let energies = times
        .iter()
        .zip(states)
        .map(|(&t, psi)| energy(t, psi))
        .collect::<Result<Vec<f64>>>()?;
    let dynamical_term = simpson(&energies, h);
    let tracked = tracker.phase();
    let raw = tracked + dynamical_term;
    let offset = 2.0 * PI * ((canonical_phase(raw) - raw) / (2.0 * PI)).round();
    let overlap_arg = tracked + offset;
    Ok(PhaseEval {
        result: GeometricPhaseResult {
            overlap_arg,
            dynamical_term,
            gamma: overlap_arg + dynamical_term,
            final_norm: states[n].norm(),
            grid_steps: n,
            zero_crossings,
        },
        coarse,
    })
}

fn expectation(h: &Operator, psi: &PureState) -> f64 {
    (psi.inner(&h.apply(psi)) / psi.norm_sqr()).re
}

/// Geometric phase of an arbitrary path on a uniform time grid, with the
/// dynamical integral taken over the Hermitian `hamiltonian`.
pub fn path_geometric_phase(
    times: &[f64],
    states: &[PureState],
    hamiltonian: &OperatorSchedule,
) -> Result<GeometricPhaseResult> {
    Ok(phase_from_path(times, states, |t, psi| Ok(expectation(hamiltonian.at(t)?, psi)))?.result)
}

fn check_normalized(psi0: &PureState) -> Result<()> {
    if (psi0.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "initial state must be normalized (norm^2 = {})",
            psi0.norm_sqr()
        )));
    }
    Ok(())
}

fn shifted_generator(model: &LindbladModel, shifts: Option<&ShiftSet>) -> Result<NoJumpGenerator> {
    match shifts {
        Some(s) => no_jump_hamiltonian(&apply_shift(model, s)?),
        None => no_jump_hamiltonian(model),
    }
}

/// No-jump geometric phase over `[0, t_final]`, optionally after shifting the
/// Lindblad operators.
///
/// The step count is doubled (up to eight times) while the overlap rotates
/// by more than pi/2 within a single step.
pub fn no_jump_geometric_phase(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    psi0: &PureState,
    t_final: f64,
    steps: usize,
) -> Result<GeometricPhaseResult> {
    check_normalized(psi0)?;
    let gen = shifted_generator(model, shifts)?;
    let herm = gen.hermitian_part();
    let mut steps = steps;
    for _ in 0..=MAX_REFINEMENTS {
        let rec = propagate_no_jump(&gen, psi0, t_final, steps)?;
        let eval = phase_from_path(&rec.times, &rec.states, |t, psi| Ok(expectation(herm.at(t)?, psi)))?;
        if !eval.coarse {
            return Ok(eval.result);
        }
        steps *= 2;
    }
    Err(Error::InvalidArgument(format!(
        "phase tracking still too coarse at {steps} steps"
    )))
}

type ComplexFn = Box<dyn Fn(f64) -> C64 + Send + Sync>;

/// A nonvanishing factor `c(t)` multiplying a path, with its logarithmic
/// derivative `c'(t)/c(t)`.
pub struct GaugeFactor {
    value: ComplexFn,
    log_derivative: ComplexFn,
}

impl GaugeFactor {
    pub fn new(
        value: impl Fn(f64) -> C64 + Send + Sync + 'static,
        log_derivative: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            log_derivative: Box::new(log_derivative),
        }
    }

    /// `c(t) = exp(rate t)`
    pub fn exponential(rate: C64) -> Self {
        Self::new(move |t| (rate * t).exp(), move |_| rate)
    }

    pub fn constant(c: C64) -> Self {
        Self::new(move |_| c, |_| C64::new(0.0, 0.0))
    }

    pub fn value(&self, t: f64) -> C64 {
        (self.value)(t)
    }

    /// The compensating Hamiltonian shift `i d/dt ln(c/|c|) = -Im(c'/c)`.
    pub fn hamiltonian_shift(&self, t: f64) -> f64 {
        -(self.log_derivative)(t).im
    }
}

/// Computes the phase of the (possibly shifted) no-jump path, then again for
/// the path `c(t) psi(t)` with `H -> H + i d/dt ln(c/|c|)`.
pub fn gauge_transform_check(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    psi0: &PureState,
    t_final: f64,
    steps: usize,
    gauge: &GaugeFactor,
) -> Result<(GeometricPhaseResult, GeometricPhaseResult)> {
    check_normalized(psi0)?;
    let gen = shifted_generator(model, shifts)?;
    let herm = gen.hermitian_part();
    let rec = propagate_no_jump(&gen, psi0, t_final, steps)?;
    let original = phase_from_path(&rec.times, &rec.states, |t, psi| Ok(expectation(herm.at(t)?, psi)))?.result;

    let mut moved = Vec::with_capacity(rec.states.len());
    for (&t, psi) in rec.times.iter().zip(&rec.states) {
        let c = gauge.value(t);
        if !(c.norm() > 0.0) || !c.norm().is_finite() {
            return Err(Error::InvalidArgument(format!("gauge factor vanishes at t = {t}")));
        }
        moved.push(psi.scaled(c));
    }
    let transformed = phase_from_path(&rec.times, &moved, |t, psi| {
        Ok(expectation(herm.at(t)?, psi) + gauge.hamiltonian_shift(t))
    })?
    .result;
    Ok((original, transformed))
}

/// Per-cell operators for jump sampling.
struct JumpCell {
    no_jump_step: Operator,
    channels: Vec<Operator>,
}

/// First-order quantum-jump sampler on a fixed step.
struct JumpSampler {
    cells: Vec<JumpCell>,
    schedule_probe: Schedule<()>,
    strength: f64,
    h: f64,
    steps: usize,
    dim: usize,
}

impl JumpSampler {
    fn new(model: &LindbladModel, shifts: Option<&ShiftSet>, t_final: f64, delta_t: f64) -> Result<Self> {
        if !(delta_t > 0.0) || !(t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need delta_t > 0 and t_final >= 0 (delta_t = {delta_t}, t_final = {t_final})"
            )));
        }
        let shifted = match shifts {
            Some(s) => apply_shift(model, s)?,
            None => model.clone(),
        };
        shifted.check_covers(0.0, t_final)?;
        let steps = ((t_final / delta_t).round() as usize).max(1);
        let h = t_final / steps as f64;
        if shifted.strength() * h > 0.1 {
            log::warn!(
                "lambda * dt = {} is not small; first-order jump statistics are inaccurate",
                shifted.strength() * h
            );
        }
        let gen = no_jump_hamiltonian(&shifted)?;
        let grid = shifted.grid()?;
        let ncells = grid.map_or(1, |g| g.cells);
        let cells = (0..ncells)
            .map(|k| {
                let t = grid.map_or(0.0, |g| g.midpoint(k));
                Ok(JumpCell {
                    no_jump_step: gen.schedule().at(t)?.scale(C64::new(0.0, -h)).exp(),
                    channels: shifted
                        .lindblads()
                        .iter()
                        .map(|l| l.at(t).cloned())
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule_probe = match grid {
            None => Schedule::Constant(()),
            Some(g) => Schedule::Piecewise {
                spacing: g.spacing,
                values: vec![(); g.cells],
            },
        };
        Ok(Self {
            cells,
            schedule_probe,
            strength: shifted.strength(),
            h,
            steps,
            dim: shifted.dim(),
        })
    }

    /// Runs one trajectory. `observe(step, psi)` sees the normalized state at
    /// every grid point, including step 0.
    fn run<R: Rng>(
        &self,
        psi0: &PureState,
        rng: &mut R,
        mut observe: impl FnMut(usize, &[C64]),
    ) -> Result<(Vec<C64>, Vec<JumpEvent>, f64)> {
        let d = self.dim;
        let mut psi = psi0.normalized()?.amplitudes().to_vec();
        let mut buf = vec![C64::new(0.0, 0.0); d];
        let mut branches: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); d]; self.cells[0].channels.len()];
        let mut probs = vec![0.0; branches.len()];
        let mut jumps = Vec::new();
        let mut survival = 1.0;
        observe(0, &psi);
        for k in 0..self.steps {
            let t = k as f64 * self.h;
            let cell = &self.cells[self.schedule_probe.cell_index(t + 0.5 * self.h)?];
            let mut total = 0.0;
            for (m, l) in cell.channels.iter().enumerate() {
                matvec_into(l.matrix(), &psi, &mut branches[m]);
                let p = self.strength * self.h * norm_sqr(&branches[m]);
                probs[m] = p;
                total += p;
            }
            if total > 1.0 {
                return Err(Error::StepTooLarge {
                    probability: total,
                    time: t,
                });
            }
            let u: f64 = rng.random();
            if u < total {
                let mut acc = 0.0;
                let mut chosen = probs.len() - 1;
                for (m, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = m;
                        break;
                    }
                }
                let n = norm_sqr(&branches[chosen]).sqrt();
                for (x, b) in psi.iter_mut().zip(&branches[chosen]) {
                    *x = b / n;
                }
                jumps.push(JumpEvent {
                    time: t + self.h,
                    channel: chosen,
                });
            } else {
                survival *= 1.0 - total;
                matvec_into(cell.no_jump_step.matrix(), &psi, &mut buf);
                let n = norm_sqr(&buf).sqrt();
                if n < NORM_UNDERFLOW {
                    return Err(Error::TotalDecay { time: t + self.h });
                }
                for (x, b) in psi.iter_mut().zip(&buf) {
                    *x = b / n;
                }
            }
            observe(k + 1, &psi);
        }
        Ok((psi, jumps, survival))
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Samples one quantum-jump trajectory with step `delta_t`.
///
/// Each step jumps into channel `m` with probability
/// `lambda dt ||(L_m - f_m) psi||^2`; otherwise the state follows the no-jump
/// generator for `dt`. The state is renormalized after every step.
pub fn sample_jump_trajectory<R: Rng>(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    psi0: &PureState,
    t_final: f64,
    delta_t: f64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    let sampler = JumpSampler::new(model, shifts, t_final, delta_t)?;
    let mut states = Vec::with_capacity(sampler.steps + 1);
    let (_, jumps, survival) = sampler.run(psi0, rng, |_, psi| {
        states.push(PureState::new(psi.to_vec()).expect("non-empty"));
    })?;
    let times = (0..=sampler.steps).map(|k| k as f64 * sampler.h).collect();
    Ok(TrajectoryRecord {
        times,
        states,
        jumps,
        survival,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub t_final: f64,
    pub delta_t: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    /// Number of intervals between recorded density estimates.
    pub checkpoints: usize,
}

/// Density estimate at one recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSnapshot {
    pub time: f64,
    pub rho: Operator,
    /// Standard error of each entry, row-major.
    pub std_error: Vec<f64>,
}

impl EnsembleSnapshot {
    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    pub jumps: usize,
    pub first_jump: Option<f64>,
    pub survival: f64,
    pub final_state: PureState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpEnsemble {
    pub snapshots: Vec<EnsembleSnapshot>,
    pub trajectories: Vec<TrajectorySummary>,
    pub mean_jumps: f64,
    pub jump_std_error: f64,
}

impl JumpEnsemble {
    pub fn final_snapshot(&self) -> &EnsembleSnapshot {
        self.snapshots.last().expect("at least one snapshot")
    }
}

const CHUNK: usize = 64;

/// Recorded step indices for `checkpoints` intervals over `steps` steps.
pub(crate) fn checkpoint_steps(steps: usize, checkpoints: usize) -> Vec<usize> {
    let c = checkpoints.clamp(1, steps.max(1));
    let mut out: Vec<usize> = (0..=c)
        .map(|j| ((j as f64 * steps as f64) / c as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Averages `n_trajectories` sampled trajectories into density estimates.
///
/// Trajectory `i` uses the random stream `(seed, i)`. Work is split into
/// fixed chunks that are merged in index order, so the result does not
/// depend on the thread count.
pub fn average_jump_ensemble(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    psi0: &PureState,
    cfg: &EnsembleConfig,
) -> Result<JumpEnsemble> {
    if cfg.n_trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    let sampler = JumpSampler::new(model, shifts, cfg.t_final, cfg.delta_t)?;
    let record = checkpoint_steps(sampler.steps, cfg.checkpoints);
    let d = sampler.dim;
    let slot_of = |step: usize| record.binary_search(&step).ok();

    struct Partial {
        moments: Vec<Vec<ComplexMoments>>,
        summaries: Vec<TrajectorySummary>,
    }

    let chunks: Vec<(usize, usize)> = (0..cfg.n_trajectories)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(cfg.n_trajectories)))
        .collect();
    let partials = chunks
        .par_iter()
        .map(|&(start, end)| -> Result<Partial> {
            let mut moments = vec![vec![ComplexMoments::default(); d * d]; record.len()];
            let mut summaries = Vec::with_capacity(end - start);
            for i in start..end {
                let mut rng = trajectory_rng(cfg.seed, i as u64);
                let (psi, jumps, survival) = sampler.run(psi0, &mut rng, |step, psi| {
                    if let Some(slot) = slot_of(step) {
                        for r in 0..d {
                            for c in 0..d {
                                moments[slot][r * d + c].push(psi[r] * psi[c].conj());
                            }
                        }
                    }
                })?;
                summaries.push(TrajectorySummary {
                    jumps: jumps.len(),
                    first_jump: jumps.first().map(|j| j.time),
                    survival,
                    final_state: PureState::new(psi)?,
                });
            }
            Ok(Partial { moments, summaries })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut moments = vec![vec![ComplexMoments::default(); d * d]; record.len()];
    let mut trajectories = Vec::with_capacity(cfg.n_trajectories);
    for p in partials {
        for (acc, part) in moments.iter_mut().zip(&p.moments) {
            for (a, b) in acc.iter_mut().zip(part) {
                a.merge(b);
            }
        }
        trajectories.extend(p.summaries);
    }
    let snapshots = record
        .iter()
        .zip(&moments)
        .map(|(&step, m)| {
            let mut rho = Operator::zeros(d);
            for r in 0..d {
                for c in 0..d {
                    rho.set(r, c, m[r * d + c].mean());
                }
            }
            EnsembleSnapshot {
                time: step as f64 * sampler.h,
                rho,
                std_error: m.iter().map(ComplexMoments::std_error).collect(),
            }
        })
        .collect();
    let mut counts = ComplexMoments::default();
    for t in &trajectories {
        counts.push(C64::new(t.jumps as f64, 0.0));
    }
    Ok(JumpEnsemble {
        snapshots,
        trajectories,
        mean_jumps: counts.mean().re,
        jump_std_error: counts.std_error(),
    })
}

/// Kraus operators of one monitoring interval starting at `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    pub delta_t: f64,
    pub time: f64,
    pub ops: Vec<Operator>,
}

impl KrausSet {
    /// `rho -> sum_mu F_mu rho F_mu^dag`
    pub fn apply(&self, rho: &Operator) -> Operator {
        let mut out = Operator::zeros(rho.dim());
        for f in &self.ops {
            out += &(f * rho * f.adjoint());
        }
        out
    }

    /// Max-entry norm of `sum_mu F_mu^dag F_mu - 1`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.ops[0].dim();
        let mut acc = Operator::zeros(d);
        for f in &self.ops {
            acc += &(f.adjoint() * f);
        }
        acc.distance(&Operator::identity(d))
    }
}

fn kraus_ops(model: &LindbladModel, shifts: Option<&ShiftSet>, delta_t: f64, time: f64) -> Result<Vec<Operator>> {
    if !(delta_t > 0.0) {
        return Err(Error::InvalidArgument(format!("delta_t must be > 0, got {delta_t}")));
    }
    let d = model.dim();
    let gen = match shifts {
        Some(s) => shifted_no_jump_hamiltonian(model, s)?,
        None => no_jump_hamiltonian(model)?,
    };
    let mut ops = vec![Operator::identity(d) - gen.schedule().at(time)?.scale(C64::new(0.0, delta_t))];
    let amp = (model.strength() * delta_t).sqrt();
    let fs = match shifts {
        Some(s) => s.values_at(time)?,
        None => vec![C64::new(0.0, 0.0); model.channels()],
    };
    for (l, f) in model.lindblads().iter().zip(fs) {
        let shifted = l.at(time)? - &Operator::identity(d).scale(f);
        ops.push(shifted.scale_real(amp));
    }
    Ok(ops)
}

/// `F_0 = 1 - i K~ dt`, `F_m = sqrt(lambda dt) (L_m - f_m)`; without shifts
/// this is the set `E`. A closed system yields the single operator `F_0`.
pub fn kraus_set(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    delta_t: f64,
    time: f64,
) -> Result<KrausSet> {
    let mut ops = kraus_ops(model, shifts, delta_t, time)?;
    if model.strength() == 0.0 {
        ops.truncate(1);
    }
    Ok(KrausSet { delta_t, time, ops })
}

/// The `(M+1) x (M+1)` channel-space matrix relating the shifted and
/// unshifted Kraus sets at one time.
pub fn kraus_connection_matrix(shifts: &[C64], lambda: f64, delta_t: f64) -> DMatrix<C64> {
    let m = shifts.len();
    let s = (lambda * delta_t).sqrt();
    let mut w = DMatrix::<C64>::identity(m + 1, m + 1);
    let total: f64 = shifts.iter().map(|f| f.norm_sqr()).sum();
    w[(0, 0)] = C64::new(1.0 - 0.5 * lambda * delta_t * total, 0.0);
    for (k, f) in shifts.iter().enumerate() {
        w[(0, k + 1)] = f.conj() * s;
        w[(k + 1, 0)] = -f * s;
    }
    w
}

/// Max-entry norm of `W^dag W - 1`.
pub fn unitarity_residual(w: &DMatrix<C64>) -> f64 {
    let n = w.nrows();
    (w.adjoint() * w - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// How well `F_mu = sum_nu W_mu,nu E_nu` holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrausConnection {
    /// Residual of the identity in the graded algebra truncated at first
    /// order in `dt` (second order in `sqrt(dt)`), in the units of `F`.
    pub first_order: f64,
    /// Residual of the plain matrix products, including higher orders.
    pub exact: f64,
}

/// Power series in `sqrt(dt)` with operator coefficients, truncated at the
/// second power.
#[derive(Clone)]
struct Graded([Operator; 3]);

impl Graded {
    fn zero(d: usize) -> Self {
        Graded([Operator::zeros(d), Operator::zeros(d), Operator::zeros(d)])
    }

    fn add_scaled(&mut self, w: &[C64; 3], e: &Graded) {
        for (k, slot) in self.0.iter_mut().enumerate() {
            for i in 0..=k {
                if w[i] != C64::new(0.0, 0.0) {
                    *slot += &e.0[k - i].scale(w[i]);
                }
            }
        }
    }

    fn distance(&self, other: &Graded, eps: f64) -> f64 {
        (0..3)
            .map(|k| self.0[k].distance(&other.0[k]) * eps.powi(k as i32))
            .fold(0.0, f64::max)
    }
}

/// Checks `F = W E` for the given shifts at time `time`. The identity holds
/// only for hidden shifts; otherwise `first_order` measures the mismatch
/// `(lambda dt / 2) sum_m (f_m L_m^dag - f_m^* L_m)` in `F_0`.
pub fn kraus_connection_residual(
    model: &LindbladModel,
    shifts: &ShiftSet,
    delta_t: f64,
    time: f64,
) -> Result<KrausConnection> {
    let e = kraus_ops(model, None, delta_t, time)?;
    let f = kraus_ops(model, Some(shifts), delta_t, time)?;
    let fs = shifts.values_at(time)?;
    let lambda = model.strength();
    let w = kraus_connection_matrix(&fs, lambda, delta_t);

    let mut exact = 0.0f64;
    for (mu, f_mu) in f.iter().enumerate() {
        let mut acc = Operator::zeros(model.dim());
        for (nu, e_nu) in e.iter().enumerate() {
            acc += &e_nu.scale(w[(mu, nu)]);
        }
        exact = exact.max(acc.distance(f_mu));
    }

    // graded coefficients: E_0 = 1 - i H~ eps^2, E_m = sqrt(lambda) L_m eps, ...
    let d = model.dim();
    let zero = C64::new(0.0, 0.0);
    let sl = lambda.sqrt();
    let h_tilde = no_jump_hamiltonian(model)?.schedule().at(time)?.clone();
    let k_tilde = shifted_no_jump_hamiltonian(model, shifts)?.schedule().at(time)?.clone();
    let minus_i = C64::new(0.0, -1.0);
    let mut e_g = vec![Graded([Operator::identity(d), Operator::zeros(d), h_tilde.scale(minus_i)])];
    let mut f_g = vec![Graded([Operator::identity(d), Operator::zeros(d), k_tilde.scale(minus_i)])];
    for (l, fm) in model.lindblads().iter().zip(&fs) {
        let l = l.at(time)?;
        e_g.push(Graded([Operator::zeros(d), l.scale_real(sl), Operator::zeros(d)]));
        let shifted = l - &Operator::identity(d).scale(*fm);
        f_g.push(Graded([Operator::zeros(d), shifted.scale_real(sl), Operator::zeros(d)]));
    }
    let total: f64 = fs.iter().map(|f| f.norm_sqr()).sum();
    let m = fs.len();
    let w_g = |mu: usize, nu: usize| -> [C64; 3] {
        match (mu, nu) {
            (0, 0) => [C64::new(1.0, 0.0), zero, C64::new(-0.5 * lambda * total, 0.0)],
            (0, n) => [zero, fs[n - 1].conj() * sl, zero],
            (n, 0) => [zero, -fs[n - 1] * sl, zero],
            (a, b) if a == b => [C64::new(1.0, 0.0), zero, zero],
            _ => [zero, zero, zero],
        }
    };
    let eps = delta_t.sqrt();
    let mut first_order = 0.0f64;
    for mu in 0..=m {
        let mut acc = Graded::zero(d);
        for (nu, e_nu) in e_g.iter().enumerate() {
            acc.add_scaled(&w_g(mu, nu), e_nu);
        }
        first_order = first_order.max(acc.distance(&f_g[mu], eps));
    }
    Ok(KrausConnection { first_order, exact })
}

/// Max-entry difference between the shifted and unshifted Kraus maps applied
/// to `rho`. Refuses shifts that are not hidden, since those maps differ at
/// first order.
pub fn kraus_maps_equal(
    model: &LindbladModel,
    shifts: &ShiftSet,
    delta_t: f64,
    rho: &DensityMatrix,
) -> Result<f64> {
    if !shift_is_hidden(model, shifts, 1e-12)? {
        return Err(Error::ShiftNotHidden(
            "some f_m^* L_m is not Hermitian, so the shifted map has a different generator".into(),
        ));
    }
    let e = kraus_set(model, None, delta_t, 0.0)?;
    let f = kraus_set(model, Some(shifts), delta_t, 0.0)?;
    Ok(e.apply(rho.operator()).distance(&f.apply(rho.operator())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::evolve_density;
    use crate::operators::{pauli, sigma_minus, Axis, BlochAngles};
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dephasing(omega: f64, lambda: f64) -> LindbladModel {
        LindbladModel::constant(pauli(Axis::Z).scale_real(omega / 2.0), vec![pauli(Axis::Z)], lambda).unwrap()
    }

    fn bloch(theta: f64, phi: f64) -> PureState {
        PureState::from_bloch(BlochAngles::new(theta, phi).unwrap())
    }

    fn eq9(omega: f64, lambda: f64, f: f64, theta0: f64) -> f64 {
        let x = 4.0 * PI * f * lambda / omega;
        let (c2, s2) = ((theta0 / 2.0).cos().powi(2), (theta0 / 2.0).sin().powi(2));
        -PI + ((x.exp() * c2 + (-x).exp() * s2).ln()) / x * PI
    }

    #[test]
    fn dephasing_generator() {
        let g = no_jump_hamiltonian(&dephasing(1.0, 0.4)).unwrap();
        let expect = pauli(Axis::Z).scale_real(0.5) - Operator::identity(2).scale(c(0.0, 0.2));
        assert!(g.schedule().values()[0].distance(&expect) < 1e-15);
        let closed = no_jump_hamiltonian(&dephasing(1.0, 0.0)).unwrap();
        assert!(closed.schedule().values()[0].distance(&pauli(Axis::Z).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn decay_generator() {
        let lp = 0.3;
        let l = pauli(Axis::X) - pauli(Axis::Y).scale(c(0.0, 1.0));
        let m = LindbladModel::constant(pauli(Axis::Z).scale_real(0.5), vec![l], lp).unwrap();
        let g = no_jump_hamiltonian(&m).unwrap();
        let i = c(0.0, 1.0);
        let expect = pauli(Axis::Z).scale_real(0.5) - pauli(Axis::Z).scale(i * lp) - Operator::identity(2).scale(i * lp);
        assert!(g.schedule().values()[0].distance(&expect) < 1e-14);
    }

    #[test]
    fn shifted_generator_for_dephasing() {
        let (lambda, f) = (0.5, 0.2);
        let m = dephasing(1.0, lambda);
        let s = ShiftSet::uniform_real(f, 1);
        let k = shifted_no_jump_hamiltonian(&m, &s).unwrap();
        let h = no_jump_hamiltonian(&m).unwrap();
        let i = c(0.0, 1.0);
        let expect = h.schedule().values()[0].clone() + pauli(Axis::Z).scale(i * lambda * f)
            - Operator::identity(2).scale(i * 0.5 * lambda * f * f);
        assert!(k.schedule().values()[0].distance(&expect) < 1e-15);
        let direct = no_jump_hamiltonian(&apply_shift(&m, &s).unwrap()).unwrap();
        assert!(k.schedule().values()[0].distance(&direct.schedule().values()[0]) < 1e-12);
        // -(lambda/2)(sigma_z - f)^2 has eigenvalues -(lambda/2)(1 -+ f)^2
        let ev = k.skew_part().values()[0].hermitian_eigenvalues();
        assert!((ev[0] + 0.5 * lambda * (1.0 + f).powi(2)).abs() < 1e-14);
        assert!((ev[1] + 0.5 * lambda * (1.0 - f).powi(2)).abs() < 1e-14);
        // the increment K~ - H~ alone is indefinite: lambda f (+-1 - f/2)
        let inc = (k.schedule().values()[0].clone() - h.schedule().values()[0].clone()).skew_part();
        let ev = inc.hermitian_eigenvalues();
        assert!((ev[0] - lambda * f * (-1.0 - f / 2.0)).abs() < 1e-14);
        assert!((ev[1] - lambda * f * (1.0 - f / 2.0)).abs() < 1e-14);
        let zero = shifted_no_jump_hamiltonian(&m, &ShiftSet::uniform_real(0.0, 1)).unwrap();
        assert!(zero.schedule().values()[0].distance(&h.schedule().values()[0]) < 1e-15);
        assert!(matches!(
            shifted_no_jump_hamiltonian(&m, &ShiftSet::uniform_real(0.1, 2)),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn unshifted_norm_decays_exponentially() {
        let lambda = 0.7;
        let g = no_jump_hamiltonian(&dephasing(1.0, lambda)).unwrap();
        let rec = propagate_no_jump(&g, &bloch(1.1, 0.3), 3.0, 300).unwrap();
        for (t, psi) in rec.times.iter().zip(&rec.states) {
            assert!((psi.norm_sqr() - (-lambda * t).exp()).abs() < 1e-13);
        }
        assert!((no_jump_probability(&rec) - (-lambda * 3.0f64).exp()).abs() < 1e-13);
        let unitary = propagate_no_jump(&no_jump_hamiltonian(&dephasing(1.0, 0.0)).unwrap(), &bloch(1.1, 0.3), 3.0, 30).unwrap();
        assert!((no_jump_probability(&unitary) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shifted_path_spirals_north() {
        let (omega, lambda, f, theta0, phi0) = (1.0, 0.4, 0.5, 2.0, 0.2);
        let m = dephasing(omega, lambda);
        let gen = no_jump_hamiltonian(&apply_shift(&m, &ShiftSet::uniform_real(f, 1)).unwrap()).unwrap();
        let rec = propagate_no_jump(&gen, &bloch(theta0, phi0), 4.0, 64).unwrap();
        for (t, psi) in rec.times.iter().zip(&rec.states) {
            let b = psi.to_bloch().unwrap();
            let theta = 2.0 * ((-2.0 * f * lambda * t).exp() * (theta0 / 2.0).tan()).atan();
            assert!((b.theta - theta).abs() < 1e-12, "t = {t}");
            let dphi = crate::numerics::wrap_to_pi(b.phi - phi0 - omega * t);
            assert!(dphi.abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn shifted_survival_at_quasi_period() {
        let (lambda, f) = (0.3, 0.4);
        let m = dephasing(1.0, lambda);
        let gen = no_jump_hamiltonian(&apply_shift(&m, &ShiftSet::uniform_real(f, 1)).unwrap()).unwrap();
        let t = 2.0 * PI;
        let rec = propagate_no_jump(&gen, &bloch(PI / 2.0, 0.0), t, 16).unwrap();
        let expect = (-lambda * t * (1.0 + f * f)).exp() * (4.0 * PI * f * lambda).cosh();
        assert!((no_jump_probability(&rec) - expect).abs() < 1e-13);
    }

    #[test]
    fn total_decay_is_reported() {
        let g = no_jump_hamiltonian(&dephasing(1.0, 400.0)).unwrap();
        assert!(matches!(
            propagate_no_jump(&g, &bloch(0.5, 0.0), 2.0, 10),
            Err(Error::TotalDecay { .. })
        ));
    }

    #[test]
    fn unshifted_equator_phase_is_minus_pi() {
        for lambda in [0.0, 0.3, 1.0] {
            let r = no_jump_geometric_phase(&dephasing(1.0, lambda), None, &bloch(PI / 2.0, 0.0), 2.0 * PI, 4096).unwrap();
            assert!((r.gamma + PI).abs() < 1e-9, "lambda = {lambda}: {}", r.gamma);
            assert_eq!(r.gamma, r.overlap_arg + r.dynamical_term);
            assert!(!r.zero_crossings.is_empty());
        }
    }

    #[test]
    fn quasi_cyclic_phase_matches_closed_form() {
        for &(f, lambda, theta0) in &[(0.2, 0.5, PI / 2.0), (2.0, 0.1, PI / 2.0), (-0.2, 1.0, PI / 6.0), (2.0, 1.0, 5.0 * PI / 6.0)] {
            let r = no_jump_geometric_phase(
                &dephasing(1.0, lambda),
                Some(&ShiftSet::uniform_real(f, 1)),
                &bloch(theta0, 0.0),
                2.0 * PI,
                4096,
            )
            .unwrap();
            let want = eq9(1.0, lambda, f, theta0);
            assert!((r.gamma - want).abs() < 1e-6, "f = {f}, lambda = {lambda}: {} vs {want}", r.gamma);
        }
        // the worked example: -pi + ln(cosh(0.8 pi)) / 0.8
        assert!((eq9(1.0, 0.1, 2.0, PI / 2.0) - (-PI + (0.8 * PI).cosh().ln() / 0.8)).abs() < 1e-12);
    }

    #[test]
    fn pole_has_no_phase() {
        let r = no_jump_geometric_phase(&dephasing(1.0, 0.6), Some(&ShiftSet::uniform_real(0.7, 1)), &bloch(0.0, 0.0), 2.0 * PI, 256).unwrap();
        assert!(r.gamma.abs() < 1e-12);
    }

    #[test]
    fn unnormalized_input_rejected() {
        let psi = PureState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(no_jump_geometric_phase(&dephasing(1.0, 0.1), None, &psi, 1.0, 16).is_err());
    }

    #[test]
    fn final_orthogonality_is_a_branch_error() {
        // sigma_x flips |0> to |1> at t = pi/2
        let m = LindbladModel::constant(pauli(Axis::X), vec![pauli(Axis::Z)], 0.0).unwrap();
        assert!(matches!(
            no_jump_geometric_phase(&m, None, &bloch(0.0, 0.0), PI / 2.0, 64),
            Err(Error::BranchTracking { .. })
        ));
    }

    #[test]
    fn gauge_examples() {
        let m = dephasing(1.0, 0.5);
        let s = ShiftSet::uniform_real(0.2, 1);
        let psi = bloch(1.0, 0.4);
        for gauge in [
            GaugeFactor::exponential(c(0.0, 0.9)),
            GaugeFactor::constant(c(2.0, 0.0)),
            GaugeFactor::exponential(c(0.3, 0.7)),
        ] {
            let (a, b) = gauge_transform_check(&m, Some(&s), &psi, 2.0 * PI, 1024, &gauge).unwrap();
            assert!((a.gamma - b.gamma).abs() < 1e-8, "{} vs {}", a.gamma, b.gamma);
        }
        assert_eq!(GaugeFactor::exponential(c(0.0, 0.9)).hamiltonian_shift(1.0), -0.9);
        let vanishing = GaugeFactor::new(|t| c(t - 1.0, 0.0), |t| c(1.0 / (t - 1.0), 0.0));
        assert!(gauge_transform_check(&m, None, &psi, 2.0, 16, &vanishing).is_err());
    }

    #[test]
    fn closed_jump_trajectory_is_unitary() {
        let m = dephasing(1.0, 0.0);
        let mut rng = crate::rng::trajectory_rng(3, 0);
        let rec = sample_jump_trajectory(&m, None, &bloch(PI / 2.0, 0.0), 2.0, 0.01, &mut rng).unwrap();
        assert!(rec.jumps.is_empty());
        let want = propagate_no_jump(&no_jump_hamiltonian(&m).unwrap(), &bloch(PI / 2.0, 0.0), 2.0, 200).unwrap();
        assert!(rec.final_state().inner(want.final_state()).norm() > 1.0 - 1e-12);
    }

    #[test]
    fn dephasing_jump_flips_azimuth() {
        let m = dephasing(0.0, 50.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rec = sample_jump_trajectory(&m, None, &bloch(PI / 2.0, 0.0), 0.1, 0.001, &mut rng).unwrap();
        assert!(!rec.jumps.is_empty());
        let phi = rec.final_state().to_bloch().unwrap().phi;
        let expect = if rec.jumps.len() % 2 == 0 { 0.0 } else { PI };
        assert!(crate::numerics::wrap_to_pi(phi - expect).abs() < 1e-12);
        for w in rec.jumps.windows(2) {
            assert!(w[0].time < w[1].time);
        }
    }

    #[test]
    fn step_too_large() {
        let m = dephasing(1.0, 20.0);
        let mut rng = crate::rng::trajectory_rng(0, 0);
        assert!(matches!(
            sample_jump_trajectory(&m, None, &bloch(1.0, 0.0), 1.0, 0.1, &mut rng),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = dephasing(1.0, 1.0);
        let run = |i| {
            let mut rng = crate::rng::trajectory_rng(9, i);
            sample_jump_trajectory(&m, None, &bloch(1.0, 0.0), 1.0, 0.01, &mut rng).unwrap()
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn single_closed_trajectory_gives_exact_density() {
        let m = dephasing(1.0, 0.0);
        let psi = bloch(PI / 3.0, 0.0);
        let cfg = EnsembleConfig { t_final: 1.5, delta_t: 0.01, n_trajectories: 1, seed: 1, checkpoints: 3 };
        let ens = average_jump_ensemble(&m, None, &psi, &cfg).unwrap();
        let exact = evolve_density(&m, &DensityMatrix::from_pure(&psi).unwrap(), 1.5, 150).unwrap();
        assert_eq!(ens.snapshots.len(), 4);
        assert!(ens.final_snapshot().rho.distance(exact.last().unwrap().1.operator()) < 1e-10);
    }

    #[test]
    fn ensemble_matches_master_equation() {
        let (lambda, t) = (0.5, 2.0);
        let m = dephasing(1.0, lambda);
        let psi = bloch(PI / 2.0, 0.0);
        let cfg = EnsembleConfig { t_final: t, delta_t: 1e-3, n_trajectories: 4000, seed: 17, checkpoints: 4 };
        let exact = evolve_density(&m, &DensityMatrix::from_pure(&psi).unwrap(), t, 2000).unwrap();
        let rho = exact.last().unwrap().1.operator().clone();
        for shifts in [None, Some(ShiftSet::uniform_real(0.3, 1))] {
            let ens = average_jump_ensemble(&m, shifts.as_ref(), &psi, &cfg).unwrap();
            let snap = ens.final_snapshot();
            let dev = snap.rho.distance(&rho);
            assert!(dev <= 3.0 * snap.max_std_error(), "{dev} vs {}", snap.max_std_error());
        }
        let ens = average_jump_ensemble(&m, None, &psi, &cfg).unwrap();
        assert!((ens.mean_jumps - lambda * t).abs() < 3.0 * ens.jump_std_error);
    }

    #[test]
    fn ensemble_does_not_depend_on_thread_count() {
        let m = dephasing(1.0, 1.0);
        let psi = bloch(1.0, 0.0);
        let cfg = EnsembleConfig { t_final: 0.5, delta_t: 0.01, n_trajectories: 200, seed: 5, checkpoints: 1 };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| average_jump_ensemble(&m, None, &psi, &cfg).unwrap());
        let b = three.install(|| average_jump_ensemble(&m, None, &psi, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn kraus_sets() {
        let (lambda, dt) = (0.5, 1e-3);
        let m = dephasing(1.0, lambda);
        let e = kraus_set(&m, None, dt, 0.0).unwrap();
        let h = no_jump_hamiltonian(&m).unwrap().schedule().values()[0].clone();
        assert!(e.ops[0].distance(&(Operator::identity(2) - h.scale(c(0.0, dt)))) < 1e-15);
        assert!(e.ops[1].distance(&pauli(Axis::Z).scale_real((lambda * dt).sqrt())) < 1e-15);
        let closed = kraus_set(&dephasing(1.0, 0.0), None, dt, 0.0).unwrap();
        assert_eq!(closed.ops.len(), 1);
        let f = kraus_set(&m, Some(&ShiftSet::uniform_real(0.2, 1)), dt, 0.0).unwrap();
        let r1 = f.completeness_residual();
        let r2 = kraus_set(&m, Some(&ShiftSet::uniform_real(0.2, 1)), dt / 2.0, 0.0).unwrap().completeness_residual();
        assert!(r1 < 1e-6);
        assert!((r1 / r2 - 4.0).abs() < 0.05, "{}", r1 / r2);
    }

    #[test]
    fn connection_matrix() {
        let w0 = kraus_connection_matrix(&[c(0.0, 0.0)], 0.5, 1e-3);
        assert_eq!(w0, DMatrix::identity(2, 2));
        // W^dag W - 1 is diagonal with lambda dt |f|^2 in the channel slot
        let (f, ldt) = (0.2, 1e-4);
        let w = kraus_connection_matrix(&[c(f, 0.0)], 1.0, ldt);
        let r = unitarity_residual(&w);
        assert!(r <= 1e-5);
        assert!((r - ldt * f * f).abs() < 1e-15);
    }

    #[test]
    fn connection_holds_to_first_order() {
        let m = dephasing(1.0, 0.5);
        let k = kraus_connection_residual(&m, &ShiftSet::uniform_real(0.2, 1), 1e-3, 0.0).unwrap();
        assert!(k.first_order < 1e-14, "{k:?}");
        assert!(k.exact > 0.0 && k.exact < 1e-4);
        // i sigma_z with an imaginary shift is hidden as well
        let rotated = LindbladModel::constant(pauli(Axis::Z).scale_real(0.5), vec![pauli(Axis::Z).scale(c(0.0, 1.0))], 0.5).unwrap();
        let k = kraus_connection_residual(&rotated, &ShiftSet::constant(&[c(0.0, 0.3)]), 1e-3, 0.0).unwrap();
        assert!(k.first_order < 1e-14, "{k:?}");
        // not hidden: F_0 picks up (lambda dt / 2)(f L^dag - f^* L)
        let k = kraus_connection_residual(&m, &ShiftSet::constant(&[c(0.1, -0.4)]), 1e-3, 0.0).unwrap();
        assert!((k.first_order - 0.5e-3 * 0.4).abs() < 1e-15, "{k:?}");
    }

    #[test]
    fn hidden_kraus_maps() {
        let m = dephasing(1.0, 0.5);
        let rho = DensityMatrix::from_pure(&bloch(PI / 2.0, 0.0)).unwrap();
        assert_eq!(kraus_maps_equal(&m, &ShiftSet::uniform_real(0.0, 1), 1e-3, &rho).unwrap(), 0.0);
        let mixed = DensityMatrix::new(Operator::identity(2).scale_real(0.5)).unwrap();
        let s = ShiftSet::uniform_real(0.2, 1);
        let a = kraus_maps_equal(&m, &s, 1e-3, &mixed).unwrap();
        let b = kraus_maps_equal(&m, &s, 5e-4, &mixed).unwrap();
        assert!(a <= 1e-4);
        assert!(b == 0.0 || a / b >= 2.5);
        let plus_a = kraus_maps_equal(&m, &s, 1e-3, &rho).unwrap();
        let plus_b = kraus_maps_equal(&m, &s, 5e-4, &rho).unwrap();
        assert!((plus_a / plus_b - 4.0).abs() < 0.1, "{}", plus_a / plus_b);
        assert!(matches!(
            kraus_maps_equal(&m, &ShiftSet::constant(&[c(0.0, 0.2)]), 1e-3, &rho),
            Err(Error::ShiftNotHidden(_))
        ));
    }

    #[test]
    fn decay_channel_is_not_hidden_under_real_shift() {
        let m = LindbladModel::constant(Operator::zeros(2), vec![sigma_minus()], 1.0).unwrap();
        let rho = DensityMatrix::from_pure(&bloch(1.0, 0.0)).unwrap();
        assert!(kraus_maps_equal(&m, &ShiftSet::uniform_real(0.1, 1), 1e-3, &rho).is_err());
    }
}
