//! Linear quantum state diffusion.
//!
//! Each trajectory obeys the Itô equation
//!
//! ```text
//! d phi = [-i H dt - (lambda/2) sum_m L_m^dag L_m dt + sqrt(lambda) sum_m L_m dw_m] phi
//! ```
//!
//! with complex Wiener increments, `E[dw dw^*] = dt` and `E[dw dw] = 0`,
//! integrated by Euler-Maruyama without renormalization. The ensemble mean of
//! `|phi><phi|` is the master-equation state, and the averaged geometric phase
//! is `arg E[<phi0|phi(T)>] + int_0^T Tr[rho H] dt`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::lindblad::{apply_shift, evolve_density, DensityMatrix, LindbladModel, ShiftSet};
use crate::numerics::{canonical_phase, simpson, CompensatedSum, ComplexMoments, PhaseTracker};
use crate::operators::{matvec_into, Operator, PureState, Schedule};
use crate::rng::trajectory_rng;
use crate::{Error, Result, C64};

/// Trajectories whose norm exceeds this are dropped from the average.
pub const NORM_GUARD: f64 = 1e100;
/// Number of intervals at which the ensemble mean is recorded.
pub const CHECKPOINTS: usize = 64;
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QsdConfig {
    pub delta_t: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub t_final: f64,
}

impl QsdConfig {
    /// Number of steps, `t_final / delta_t` rounded to the nearest integer.
    /// A non-integral ratio is logged; the step actually used is
    /// [`QsdConfig::effective_step`].
    pub fn steps(&self) -> Result<usize> {
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta_t must be > 0, got {}", self.delta_t)));
        }
        if !(self.t_final >= self.delta_t) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final = {} must be at least delta_t = {}",
                self.t_final, self.delta_t
            )));
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("need at least one trajectory".into()));
        }
        let ratio = self.t_final / self.delta_t;
        let steps = ratio.round() as usize;
        if (ratio - steps as f64).abs() > 1e-9 * ratio {
            log::warn!(
                "t_final / delta_t = {ratio} is not an integer; using {steps} steps of {}",
                self.t_final / steps as f64
            );
        }
        Ok(steps)
    }

    pub fn effective_step(&self) -> Result<f64> {
        Ok(self.t_final / self.steps()? as f64)
    }
}

/// Fills `out` with independent increments `sqrt(dt/2) (xi_1 + i xi_2)`.
pub fn fill_wiener<R: Rng>(out: &mut [C64], delta_t: f64, rng: &mut R) {
    let s = (0.5 * delta_t).sqrt();
    for w in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *w = C64::new(s * re, s * im);
    }
}

pub fn wiener_increments<R: Rng>(channels: usize, delta_t: f64, rng: &mut R) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); channels];
    fill_wiener(&mut out, delta_t, rng);
    out
}

fn shifted(model: &LindbladModel, shifts: Option<&ShiftSet>) -> Result<LindbladModel> {
    match shifts {
        Some(s) => apply_shift(model, s),
        None => Ok(model.clone()),
    }
}

fn drift(model: &LindbladModel, t: f64, delta_t: f64) -> Result<Operator> {
    let d = model.dim();
    let h = model.hamiltonian().at(t)?;
    let rate = model.jump_rate_operator(t)?;
    Ok(Operator::identity(d) - h.scale(C64::new(0.0, delta_t)) - rate.scale_real(0.5 * model.strength() * delta_t))
}

/// One Euler-Maruyama step from `t`, with the shifted channels when `shifts`
/// is given.
pub fn qsd_step(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    phi: &PureState,
    t: f64,
    delta_t: f64,
    dw: &[C64],
) -> Result<PureState> {
    let m = shifted(model, shifts)?;
    if phi.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: phi.dim(),
        });
    }
    if dw.len() != m.channels() {
        return Err(Error::ChannelMismatch {
            model: m.channels(),
            shifts: dw.len(),
        });
    }
    let mut out = drift(&m, t, delta_t)?.apply(phi);
    let sl = m.strength().sqrt();
    for (l, w) in m.lindblads().iter().zip(dw) {
        let kick = l.at(t)?.scale(w * sl).apply(phi);
        out = PureState::new(
            out.amplitudes()
                .iter()
                .zip(kick.amplitudes())
                .map(|(a, b)| a + b)
                .collect(),
        )?;
    }
    Ok(out)
}

struct Cell {
    drift: Operator,
    kicks: Vec<Operator>,
}

/// Fixed-step integrator with per-cell operators precomputed. The drift and
/// `sqrt(lambda) L_m` are frozen at the left end of each step.
pub struct QsdIntegrator {
    cells: Vec<Cell>,
    probe: Schedule<()>,
    h: f64,
    steps: usize,
    dim: usize,
    channels: usize,
}

impl QsdIntegrator {
    pub fn new(model: &LindbladModel, shifts: Option<&ShiftSet>, t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need steps >= 1 and t_final > 0 (steps = {steps}, t_final = {t_final})"
            )));
        }
        let m = shifted(model, shifts)?;
        m.check_covers(0.0, t_final)?;
        let h = t_final / steps as f64;
        let grid = m.grid()?;
        let sl = m.strength().sqrt();
        let cells = (0..grid.map_or(1, |g| g.cells))
            .map(|k| {
                // left end of the cell, nudged inside
                let t = grid.map_or(0.0, |g| (k as f64 + 1e-9) * g.spacing);
                Ok(Cell {
                    drift: drift(&m, t, h)?,
                    kicks: m
                        .lindblads()
                        .iter()
                        .map(|l| Ok(l.at(t)?.scale_real(sl)))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let probe = match grid {
            None => Schedule::Constant(()),
            Some(g) => Schedule::Piecewise {
                spacing: g.spacing,
                values: vec![(); g.cells],
            },
        };
        Ok(Self {
            cells,
            probe,
            h,
            steps,
            dim: m.dim(),
            channels: m.channels(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Integrates from `phi0`. `noise(step, dw)` fills the increments of each
    /// step and `observe(step, phi)` sees the state at every grid point.
    /// Returns `None` if the norm exceeded [`NORM_GUARD`].
    pub fn run(
        &self,
        phi0: &[C64],
        mut noise: impl FnMut(usize, &mut [C64]),
        mut observe: impl FnMut(usize, &[C64]),
    ) -> Result<Option<Vec<C64>>> {
        if phi0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: phi0.len(),
            });
        }
        let mut phi = phi0.to_vec();
        let mut next = vec![C64::new(0.0, 0.0); self.dim];
        let mut kick = vec![C64::new(0.0, 0.0); self.dim];
        let mut dw = vec![C64::new(0.0, 0.0); self.channels];
        observe(0, &phi);
        for k in 0..self.steps {
            let t = k as f64 * self.h;
            let cell = &self.cells[self.probe.cell_index(t + 1e-9 * self.h)?];
            noise(k, &mut dw);
            matvec_into(cell.drift.matrix(), &phi, &mut next);
            for (l, w) in cell.kicks.iter().zip(&dw) {
                matvec_into(l.matrix(), &phi, &mut kick);
                for (n, x) in next.iter_mut().zip(&kick) {
                    *n += w * x;
                }
            }
            std::mem::swap(&mut phi, &mut next);
            let norm_sqr: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
            if !(norm_sqr < NORM_GUARD * NORM_GUARD) {
                return Ok(None);
            }
            observe(k + 1, &phi);
        }
        Ok(Some(phi))
    }

    /// Integrates with Wiener increments drawn from `rng`.
    pub fn run_sampled<R: Rng>(&self, phi0: &[C64], rng: &mut R, observe: impl FnMut(usize, &[C64])) -> Result<Option<Vec<C64>>> {
        let h = self.h;
        self.run(phi0, |_, dw| fill_wiener(dw, h, rng), observe)
    }
}

/// Monte Carlo estimate of `E[<phi0|phi(t)>]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapEstimate {
    pub mean: C64,
    pub std_error: f64,
    /// `(t, mean overlap)` at every recorded time, starting with `(0, 1)`.
    pub checkpoints: Vec<(f64, C64)>,
    pub n_used: usize,
    pub excluded: usize,
}

fn check_normalized(phi0: &PureState) -> Result<()> {
    if (phi0.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "initial state must be normalized (norm^2 = {})",
            phi0.norm_sqr()
        )));
    }
    Ok(())
}

fn record_steps(steps: usize) -> Vec<usize> {
    crate::jump::checkpoint_steps(steps, CHECKPOINTS)
}

fn chunks(n: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect()
}

/// Averages `<phi0|phi(T)>` over `cfg.n_trajectories` trajectories.
///
/// Trajectory `i` draws its noise from stream `(seed, i)`; chunks are merged
/// in index order so results do not depend on the thread count.
pub fn averaged_overlap(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    phi0: &PureState,
    cfg: &QsdConfig,
) -> Result<OverlapEstimate> {
    check_normalized(phi0)?;
    let steps = cfg.steps()?;
    let integ = QsdIntegrator::new(model, shifts, cfg.t_final, steps)?;
    let record = record_steps(steps);
    let psi0 = phi0.amplitudes();
    let overlap = |phi: &[C64]| -> C64 { psi0.iter().zip(phi).map(|(a, b)| a.conj() * b).sum() };

    let parts = chunks(cfg.n_trajectories)
        .par_iter()
        .map(|&(start, end)| -> Result<(Vec<ComplexMoments>, usize)> {
            let mut acc = vec![ComplexMoments::default(); record.len()];
            let mut trial = vec![C64::new(0.0, 0.0); record.len()];
            let mut excluded = 0;
            for i in start..end {
                let mut rng = trajectory_rng(cfg.seed, i as u64);
                let mut slot = 0;
                let done = integ.run_sampled(psi0, &mut rng, |k, phi| {
                    if slot < record.len() && record[slot] == k {
                        trial[slot] = overlap(phi);
                        slot += 1;
                    }
                })?;
                if done.is_some() {
                    for (a, z) in acc.iter_mut().zip(&trial) {
                        a.push(*z);
                    }
                } else {
                    excluded += 1;
                }
            }
            Ok((acc, excluded))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut acc = vec![ComplexMoments::default(); record.len()];
    let mut excluded = 0;
    for (part, ex) in parts {
        for (a, b) in acc.iter_mut().zip(&part) {
            a.merge(b);
        }
        excluded += ex;
    }
    if excluded > 0 {
        log::warn!("{excluded} of {} trajectories exceeded the norm guard and were excluded", cfg.n_trajectories);
    }
    let last = acc.last().expect("at least two records");
    if last.count() == 0 {
        return Err(Error::Integration {
            step: steps,
            time: cfg.t_final,
            reason: "every trajectory exceeded the norm guard".into(),
        });
    }
    let h = integ.step_size();
    Ok(OverlapEstimate {
        mean: last.mean(),
        std_error: last.std_error(),
        checkpoints: record.iter().zip(&acc).map(|(&k, a)| (k as f64 * h, a.mean())).collect(),
        n_used: last.count(),
        excluded,
    })
}

/// Averaged geometric phase of a QSD ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct QsdEnsembleResult {
    pub mean_overlap: C64,
    pub std_error: f64,
    /// `overlap_arg + dynamical_term`, on the branch `(-2 pi, 0]`.
    pub alpha_g: f64,
    /// `arg E[<phi0|phi(T)>]`, unwrapped through the checkpoints and offset
    /// by the multiple of 2 pi that puts `alpha_g` on its branch.
    pub overlap_arg: f64,
    /// Raw unwrapped argument of the mean overlap, starting from 0.
    pub tracked_arg: f64,
    pub dynamical_term: f64,
    /// Standard error of `arg` of the mean, `std_error / |mean|`.
    pub arg_std_error: f64,
    pub n_used: usize,
    pub excluded: usize,
}

/// `alpha_g = arg E[<phi0|phi(T)>] + int_0^T Tr[rho(t) H(t)] dt` with `rho(t)`
/// from the master equation of the (shifted) model.
pub fn averaged_geometric_phase(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    phi0: &PureState,
    cfg: &QsdConfig,
) -> Result<QsdEnsembleResult> {
    let est = averaged_overlap(model, shifts, phi0, cfg)?;
    let mut tracker = PhaseTracker::starting_at(0.0);
    for (_, z) in &est.checkpoints {
        tracker.push(*z);
    }
    let tracked = tracker.phase();
    let dynamical_term = dynamical_term(model, shifts, phi0, cfg)?;
    let raw = tracked + dynamical_term;
    let offset = 2.0 * std::f64::consts::PI * ((canonical_phase(raw) - raw) / (2.0 * std::f64::consts::PI)).round();
    Ok(QsdEnsembleResult {
        mean_overlap: est.mean,
        std_error: est.std_error,
        alpha_g: tracked + offset + dynamical_term,
        overlap_arg: tracked + offset,
        tracked_arg: tracked,
        dynamical_term,
        arg_std_error: est.std_error / est.mean.norm(),
        n_used: est.n_used,
        excluded: est.excluded,
    })
}

/// `int_0^T Tr[rho H] dt` on the QSD grid from the master equation.
pub fn dynamical_term(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    phi0: &PureState,
    cfg: &QsdConfig,
) -> Result<f64> {
    let m = shifted(model, shifts)?;
    let steps = cfg.steps()?;
    let path = evolve_density(&m, &DensityMatrix::from_pure(phi0)?, cfg.t_final, steps)?;
    let energies = path
        .iter()
        .map(|(t, rho)| Ok(rho.expectation(m.hamiltonian().at(*t)?).re))
        .collect::<Result<Vec<f64>>>()?;
    Ok(simpson(&energies, cfg.t_final / steps as f64))
}

/// Ratio estimate `sum |phi><phi| / sum <phi|phi>` at `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub rho: Operator,
    /// Delta-method standard error of each entry, row-major.
    pub std_error: Vec<f64>,
    pub n_used: usize,
}

impl DensityEstimate {
    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Default)]
struct RatioSums {
    x: Vec<(CompensatedSum, CompensatedSum)>,
    xx: Vec<CompensatedSum>,
    xw: Vec<(CompensatedSum, CompensatedSum)>,
    w: CompensatedSum,
    ww: CompensatedSum,
    n: usize,
}

impl RatioSums {
    fn new(entries: usize) -> Self {
        Self {
            x: vec![Default::default(); entries],
            xx: vec![Default::default(); entries],
            xw: vec![Default::default(); entries],
            ..Default::default()
        }
    }

    fn push(&mut self, phi: &[C64]) {
        let d = phi.len();
        let w: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        for r in 0..d {
            for c in 0..d {
                let x = phi[r] * phi[c].conj();
                let k = r * d + c;
                self.x[k].0.add(x.re);
                self.x[k].1.add(x.im);
                self.xx[k].add(x.norm_sqr());
                self.xw[k].0.add(x.re * w);
                self.xw[k].1.add(x.im * w);
            }
        }
        self.w.add(w);
        self.ww.add(w * w);
        self.n += 1;
    }

    fn merge(&mut self, o: &RatioSums) {
        for (a, b) in self.x.iter_mut().zip(&o.x) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }
        for (a, b) in self.xx.iter_mut().zip(&o.xx) {
            a.merge(b);
        }
        for (a, b) in self.xw.iter_mut().zip(&o.xw) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }
        self.w.merge(&o.w);
        self.ww.merge(&o.ww);
        self.n += o.n;
    }
}

/// Ensemble-renormalized density estimate at `cfg.t_final`.
pub fn renormalized_density(
    model: &LindbladModel,
    shifts: Option<&ShiftSet>,
    phi0: &PureState,
    cfg: &QsdConfig,
) -> Result<DensityEstimate> {
    check_normalized(phi0)?;
    let steps = cfg.steps()?;
    let integ = QsdIntegrator::new(model, shifts, cfg.t_final, steps)?;
    let d = phi0.dim();
    let parts = chunks(cfg.n_trajectories)
        .par_iter()
        .map(|&(start, end)| -> Result<RatioSums> {
            let mut sums = RatioSums::new(d * d);
            for i in start..end {
                let mut rng = trajectory_rng(cfg.seed, i as u64);
                if let Some(phi) = integ.run_sampled(phi0.amplitudes(), &mut rng, |_, _| {})? {
                    sums.push(&phi);
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = RatioSums::new(d * d);
    for p in &parts {
        sums.merge(p);
    }
    if sums.n < 2 {
        return Err(Error::InvalidArgument("need at least two usable trajectories".into()));
    }
    let n = sums.n as f64;
    let w = sums.w.value();
    let ww = sums.ww.value();
    let mean_w = w / n;
    let mut rho = Operator::zeros(d);
    let mut std_error = Vec::with_capacity(d * d);
    for k in 0..d * d {
        let x = C64::new(sums.x[k].0.value(), sums.x[k].1.value());
        let xw = C64::new(sums.xw[k].0.value(), sums.xw[k].1.value());
        let r = x / w;
        // sum |x_i - r w_i|^2
        let resid = (sums.xx[k].value() - 2.0 * (r.conj() * xw).re + r.norm_sqr() * ww).max(0.0);
        std_error.push((resid / (n * (n - 1.0))).sqrt() / mean_w);
        rho.set(k / d, k % d, r);
    }
    Ok(DensityEstimate {
        rho,
        std_error,
        n_used: sums.n,
    })
}
