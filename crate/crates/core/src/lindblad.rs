//! Lindblad models, master-equation integration and symmetry transforms.
//!
//! The master equation is
//!
//! ```text
//! d rho/dt = -i[H(t), rho] + lambda sum_m (L_m rho L_m^dag - 1/2 {L_m^dag L_m, rho})
//! ```
//!
//! Three transformations leave it invariant: a zero-point shift of `H`, a
//! unitary mixing of the channels, and shifts `L_m -> L_m - f_m(t)` whenever
//! every `f_m^*(t) L_m` is Hermitian. [`shift_is_hidden`] decides the last
//! condition; [`induced_hamiltonian`] gives the Hamiltonian that a general
//! shift is equivalent to.

use nalgebra::DMatrix;

use crate::operators::{common_grid, Grid, Operator, OperatorSchedule, PureState, Schedule};
use crate::{Error, Result, C64};

const HALF: C64 = C64::new(0.5, 0.0);

/// Tolerance for the density-matrix invariants (Hermiticity, trace, positivity).
pub const DENSITY_TOL: f64 = 1e-10;
/// Deviations beyond this abort an integration.
pub const DENSITY_HARD_TOL: f64 = 1e-6;

pub type ShiftSchedule = Schedule<C64>;

/// Hamiltonian schedule, Lindblad channels and coupling strength `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    hamiltonian: OperatorSchedule,
    lindblads: Vec<OperatorSchedule>,
    strength: f64,
    dim: usize,
}

impl LindbladModel {
    pub fn new(
        hamiltonian: OperatorSchedule,
        lindblads: Vec<OperatorSchedule>,
        strength: f64,
    ) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coupling strength must be finite and >= 0, got {strength}"
            )));
        }
        Self::build(hamiltonian, lindblads, strength)
    }

    /// Constant model that also accepts a negative `strength`. Such a model
    /// is not a valid master equation but still defines a no-jump generator.
    pub fn formal(hamiltonian: Operator, lindblads: Vec<Operator>, strength: f64) -> Result<Self> {
        if !strength.is_finite() {
            return Err(Error::InvalidArgument(format!("coupling strength must be finite, got {strength}")));
        }
        Self::build(
            hamiltonian.into(),
            lindblads.into_iter().map(Schedule::Constant).collect(),
            strength,
        )
    }

    fn build(hamiltonian: OperatorSchedule, lindblads: Vec<OperatorSchedule>, strength: f64) -> Result<Self> {
        let dim = hamiltonian.dim()?;
        for l in &lindblads {
            let d = l.dim()?;
            if d != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: d,
                });
            }
        }
        let model = Self {
            hamiltonian,
            lindblads,
            strength,
            dim,
        };
        model.grid()?;
        Ok(model)
    }

    /// Time-independent model.
    pub fn constant(hamiltonian: Operator, lindblads: Vec<Operator>, strength: f64) -> Result<Self> {
        Self::new(
            hamiltonian.into(),
            lindblads.into_iter().map(Schedule::Constant).collect(),
            strength,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &OperatorSchedule {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[OperatorSchedule] {
        &self.lindblads
    }

    pub fn channels(&self) -> usize {
        self.lindblads.len()
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn with_strength(&self, strength: f64) -> Result<Self> {
        Self::new(self.hamiltonian.clone(), self.lindblads.clone(), strength)
    }

    pub fn with_hamiltonian(&self, hamiltonian: OperatorSchedule) -> Result<Self> {
        Self::new(hamiltonian, self.lindblads.clone(), self.strength)
    }

    /// Common grid of all schedules in the model, if any is piecewise.
    pub fn grid(&self) -> Result<Option<Grid>> {
        common_grid(
            std::iter::once(self.hamiltonian.grid()).chain(self.lindblads.iter().map(|l| l.grid())),
        )
    }

    /// Latest time every schedule covers.
    pub fn end(&self) -> f64 {
        self.grid().ok().flatten().map_or(f64::INFINITY, |g| g.end())
    }

    pub(crate) fn check_covers(&self, t0: f64, t1: f64) -> Result<()> {
        let covered = self.hamiltonian.covers(t0, t1) && self.lindblads.iter().all(|l| l.covers(t0, t1));
        if covered {
            Ok(())
        } else {
            Err(Error::Domain {
                t0,
                t1,
                end: self.end(),
            })
        }
    }

    /// `sum_m L_m^dag L_m` at time `t`.
    pub fn jump_rate_operator(&self, t: f64) -> Result<Operator> {
        let mut acc = Operator::zeros(self.dim);
        for l in &self.lindblads {
            let l = l.at(t)?;
            acc += &(l.adjoint() * l);
        }
        Ok(acc)
    }
}

/// Complex shift schedules `f_m(t)`, one per Lindblad channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    shifts: Vec<ShiftSchedule>,
}

impl ShiftSet {
    pub fn new(shifts: Vec<ShiftSchedule>) -> Self {
        Self { shifts }
    }

    pub fn constant(values: &[C64]) -> Self {
        Self::new(values.iter().copied().map(Schedule::Constant).collect())
    }

    /// The same real constant shift on every channel.
    pub fn uniform_real(f: f64, channels: usize) -> Self {
        Self::constant(&vec![C64::new(f, 0.0); channels])
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn shifts(&self) -> &[ShiftSchedule] {
        &self.shifts
    }

    pub fn values_at(&self, t: f64) -> Result<Vec<C64>> {
        self.shifts.iter().map(|s| s.at(t).copied()).collect()
    }

    pub(crate) fn check_channels(&self, model: &LindbladModel) -> Result<()> {
        if self.len() != model.channels() {
            return Err(Error::ChannelMismatch {
                model: model.channels(),
                shifts: self.len(),
            });
        }
        Ok(())
    }
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

/// How far an operator is from being a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityDeviation {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl DensityDeviation {
    pub fn of(op: &Operator) -> Self {
        Self {
            hermiticity: op.distance(&op.adjoint()),
            trace: (op.trace() - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue: op.hermitian_eigenvalues()[0],
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.hermiticity <= tol && self.trace <= tol && self.min_eigenvalue >= -tol
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to [`DENSITY_TOL`].
    pub fn new(op: Operator) -> Result<Self> {
        let dev = DensityDeviation::of(&op);
        if !dev.within(DENSITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "not a density matrix: {dev:?}"
            )));
        }
        Ok(Self { op })
    }

    pub(crate) fn unchecked(op: Operator) -> Self {
        Self { op }
    }

    /// `|psi><psi| / <psi|psi>`
    pub fn from_pure(psi: &PureState) -> Result<Self> {
        Ok(Self {
            op: psi.normalized()?.projector(),
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.op.get(row, col)
    }

    /// `Tr[rho A]`
    pub fn expectation(&self, a: &Operator) -> C64 {
        (&self.op * a).trace()
    }
}

/// Operators of one grid cell, cached for repeated right-hand-side calls.
struct CellOps {
    h: Operator,
    ls: Vec<Operator>,
    rate: Operator,
}

struct RhsCache {
    strength: f64,
    cells: Vec<CellOps>,
    grid: Option<Grid>,
}

impl RhsCache {
    fn new(model: &LindbladModel) -> Result<Self> {
        let grid = model.grid()?;
        let n = grid.map_or(1, |g| g.cells);
        let cells = (0..n)
            .map(|k| {
                let t = grid.map_or(0.0, |g| g.midpoint(k));
                Ok(CellOps {
                    h: model.hamiltonian.at(t)?.clone(),
                    ls: model
                        .lindblads
                        .iter()
                        .map(|l| l.at(t).cloned())
                        .collect::<Result<_>>()?,
                    rate: model.jump_rate_operator(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            strength: model.strength,
            cells,
            grid,
        })
    }

    fn cell(&self, t: f64) -> Result<&CellOps> {
        match self.grid {
            None => Ok(&self.cells[0]),
            Some(g) => {
                let probe: Schedule<()> = Schedule::Piecewise {
                    spacing: g.spacing,
                    values: vec![(); g.cells],
                };
                Ok(&self.cells[probe.cell_index(t)?])
            }
        }
    }

    fn rhs(&self, rho: &Operator, t: f64) -> Result<Operator> {
        let c = self.cell(t)?;
        let i = C64::new(0.0, 1.0);
        let mut out = Operator::commutator(&c.h, rho).scale(-i);
        if self.strength > 0.0 {
            let mut diss = Operator::anticommutator(&c.rate, rho).scale(-HALF);
            for l in &c.ls {
                diss += &(l * rho * l.adjoint());
            }
            out += &diss.scale_real(self.strength);
        }
        Ok(out)
    }
}

/// Right-hand side of the master equation at time `t`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &Operator, t: f64) -> Result<Operator> {
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    RhsCache::new(model)?.rhs(rho, t)
}

/// Integrates the master equation from `rho0` over `[0, t_final]` with
/// `steps` classical RK4 steps. Returns `steps + 1` grid points.
///
/// Every grid point is checked against the density-matrix invariants. A
/// deviation beyond [`DENSITY_HARD_TOL`] aborts with an integration error;
/// smaller deviations beyond [`DENSITY_TOL`] are logged.
pub fn evolve_density(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    steps: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if steps == 0 || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need steps >= 1 and t_final >= 0 (steps = {steps}, t_final = {t_final})"
        )));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    model.check_covers(0.0, t_final)?;
    let cache = RhsCache::new(model)?;
    let h = t_final / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut rho = rho0.operator().clone();
    out.push((0.0, rho0.clone()));
    let mut soft_violations = 0usize;
    for n in 0..steps {
        let t = n as f64 * h;
        let k1 = cache.rhs(&rho, t)?;
        let k2 = cache.rhs(&(&rho + &k1.scale_real(0.5 * h)), t + 0.5 * h)?;
        let k3 = cache.rhs(&(&rho + &k2.scale_real(0.5 * h)), t + 0.5 * h)?;
        let k4 = cache.rhs(&(&rho + &k3.scale_real(h)), t + h)?;
        let incr = k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4;
        rho = rho + incr.scale_real(h / 6.0);

        let dev = DensityDeviation::of(&rho);
        if !dev.within(DENSITY_HARD_TOL) {
            return Err(Error::Integration {
                step: n + 1,
                time: t + h,
                reason: format!("density-matrix invariants violated: {dev:?}"),
            });
        }
        if !dev.within(DENSITY_TOL) {
            soft_violations += 1;
        }
        out.push(((n + 1) as f64 * h, DensityMatrix::unchecked(rho.clone())));
    }
    if soft_violations > 0 {
        log::warn!(
            "{soft_violations} grid points exceeded the {DENSITY_TOL:e} density tolerance"
        );
    }
    Ok(out)
}

/// Max-entry change of `rho(T)` when the step count is doubled.
pub fn convergence_check(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    steps: usize,
) -> Result<f64> {
    let coarse = evolve_density(model, rho0, t_final, steps)?;
    let fine = evolve_density(model, rho0, t_final, 2 * steps)?;
    let a = &coarse.last().expect("non-empty").1;
    let b = &fine.last().expect("non-empty").1;
    Ok(a.operator().distance(b.operator()))
}

/// Replaces every channel `L_m` by `L_m - f_m(t)`, keeping `H` and `lambda`.
///
/// The result describes the same dynamics as the original channels with
/// Hamiltonian [`induced_hamiltonian`]. Time-dependent shifts turn the
/// channels into piecewise schedules on the shift grid.
pub fn apply_shift(model: &LindbladModel, shifts: &ShiftSet) -> Result<LindbladModel> {
    shifts.check_channels(model)?;
    let d = model.dim();
    let lindblads = model
        .lindblads
        .iter()
        .zip(shifts.shifts())
        .map(|(l, f)| {
            let grid = common_grid([l.grid(), f.grid()])?;
            Schedule::from_grid(grid, |t| {
                Ok(l.at(t)? - &Operator::identity(d).scale(*f.at(t)?))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LindbladModel::new(model.hamiltonian.clone(), lindblads, model.strength)
}

/// `K(t) = H(t) - (i lambda / 2) sum_m (f_m^* L_m - f_m L_m^dag)`: the
/// Hamiltonian that, with the unshifted channels, reproduces the evolution of
/// the shifted channels.
pub fn induced_hamiltonian(model: &LindbladModel, shifts: &ShiftSet) -> Result<OperatorSchedule> {
    shifts.check_channels(model)?;
    let grid = common_grid(
        std::iter::once(model.grid()?).chain(shifts.shifts().iter().map(|s| s.grid())),
    )?;
    let factor = C64::new(0.0, -0.5 * model.strength);
    Schedule::from_grid(grid, |t| {
        let mut k = model.hamiltonian.at(t)?.clone();
        for (l, f) in model.lindblads.iter().zip(shifts.shifts()) {
            let (l, f) = (l.at(t)?, *f.at(t)?);
            let term = l.scale(f.conj()) - l.adjoint().scale(f);
            k += &term.scale(factor);
        }
        Ok(k)
    })
}

/// `L_m -> sum_n V_mn L_n` for a unitary `V` over the channel index.
pub fn apply_unitary_mixing(model: &LindbladModel, v: &DMatrix<C64>) -> Result<LindbladModel> {
    let m = model.channels();
    if v.nrows() != m || v.ncols() != m {
        return Err(Error::ChannelMismatch {
            model: m,
            shifts: v.nrows(),
        });
    }
    let residual = (v.adjoint() * v - DMatrix::<C64>::identity(m, m))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::NotUnitary { residual });
    }
    let grid = common_grid(model.lindblads.iter().map(|l| l.grid()))?;
    let d = model.dim();
    let lindblads = (0..m)
        .map(|row| {
            Schedule::from_grid(grid, |t| {
                let mut acc = Operator::zeros(d);
                for (n, l) in model.lindblads.iter().enumerate() {
                    acc += &l.at(t)?.scale(v[(row, n)]);
                }
                Ok(acc)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LindbladModel::new(model.hamiltonian.clone(), lindblads, model.strength)
}

/// Per channel: is `f_m^*(t) L_m(t)` Hermitian on every grid cell?
pub fn hidden_channels(model: &LindbladModel, shifts: &ShiftSet, tol: f64) -> Result<Vec<bool>> {
    shifts.check_channels(model)?;
    model
        .lindblads
        .iter()
        .zip(shifts.shifts())
        .map(|(l, f)| {
            let grid = common_grid([l.grid(), f.grid()])?;
            let cells = grid.map_or(1, |g| g.cells);
            for k in 0..cells {
                let t = grid.map_or(0.0, |g| g.midpoint(k));
                let prod = l.at(t)?.scale(f.at(t)?.conj());
                if !prod.is_hermitian(tol) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect()
}

/// True iff every `f_m^*(t) L_m` is Hermitian, i.e. the shift leaves the
/// master equation unchanged.
pub fn shift_is_hidden(model: &LindbladModel, shifts: &ShiftSet, tol: f64) -> Result<bool> {
    Ok(hidden_channels(model, shifts, tol)?.into_iter().all(|h| h))
}

/// `H(t) -> H(t) - h(t)`.
pub fn zero_point_shift(model: &LindbladModel, h: &Schedule<f64>) -> Result<LindbladModel> {
    let d = model.dim();
    let grid = common_grid([model.hamiltonian.grid(), h.grid()])?;
    let ham = Schedule::from_grid(grid, |t| {
        Ok(model.hamiltonian.at(t)? - &Operator::identity(d).scale_real(*h.at(t)?))
    })?;
    model.with_hamiltonian(ham)
}

/// Probe states for comparing generators: basis projectors and the
/// projectors onto `(|i> + |j>)/sqrt2` and `(|i> + i|j>)/sqrt2`. For a qubit
/// these are the six Pauli eigenstates.
pub fn probe_states(dim: usize) -> Vec<Operator> {
    let mut out = Vec::new();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        out.push(PureState::basis(dim, i).expect("in range").projector());
        for j in i + 1..dim {
            for phase in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)] {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[i] = C64::new(s, 0.0);
                v[j] = phase * s;
                out.push(PureState::new(v).expect("non-empty").projector());
            }
        }
    }
    out
}

/// Largest max-entry difference of the two right-hand sides over
/// [`probe_states`] at time `t`.
pub fn generator_difference(a: &LindbladModel, b: &LindbladModel, t: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (ca, cb) = (RhsCache::new(a)?, RhsCache::new(b)?);
    let mut worst = 0.0f64;
    for rho in probe_states(a.dim()) {
        worst = worst.max(ca.rhs(&rho, t)?.distance(&cb.rhs(&rho, t)?));
    }
    Ok(worst)
}
