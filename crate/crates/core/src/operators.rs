//! Small dense complex linear algebra.
//!
//! Operators are square complex matrices of modest dimension (2 for qubits,
//! up to ~16 for truncated Fock spaces). Everything here is a plain value
//! type; schedules describe piecewise-constant time dependence on a uniform
//! grid starting at `t = 0`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur};

use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Relative slack used when deciding whether a time lies inside a schedule.
const COVER_SLACK: f64 = 1e-12;

/// A square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    /// Builds an operator from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDimension(
                "matrix literal must be square and non-empty".into(),
            ));
        }
        Ok(Self {
            m: DMatrix::from_fn(d, d, |i, j| rows[i][j]),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let d = entries.len();
        Self {
            m: DMatrix::from_fn(d, d, |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.m[(row, col)] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { m: &self.m * c }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(a: &Operator, b: &Operator) -> Operator {
        Self {
            m: &a.m * &b.m - &b.m * &a.m,
        }
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
        Self {
            m: &a.m * &b.m + &b.m * &a.m,
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry distance between two operators of equal dimension.
    pub fn distance(&self, other: &Operator) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// True iff the max-entry magnitude of `A - A^dag` is at most `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                if (self.m[(i, j)] - self.m[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        let a = &self.m;
        let ad = a.adjoint();
        (a * &ad - &ad * a).iter().all(|z| z.norm() <= tol)
    }

    /// `(A + A^dag) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self {
            m: (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0),
        }
    }

    /// The Hermitian `B` in `A = hermitian_part(A) + i B`.
    pub fn skew_part(&self) -> Self {
        Self {
            m: (&self.m - self.m.adjoint()) * C64::new(0.0, -0.5),
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .hermitian_part()
            .m
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Matrix exponential `exp(A)`.
    ///
    /// Hermitian matrices go through a symmetric eigendecomposition, other
    /// normal matrices through a complex Schur form (diagonal for normal
    /// input). Everything else uses scaling and squaring of a Taylor series.
    pub fn exp(&self) -> Operator {
        let d = self.dim();
        if d == 1 {
            return Self {
                m: DMatrix::from_element(1, 1, self.m[(0, 0)].exp()),
            };
        }
        let scale = self.max_abs().max(1.0);
        if self.is_hermitian(1e-12 * scale) {
            let eig = self.hermitian_part().m.symmetric_eigen();
            let v = &eig.eigenvectors;
            let diag = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    C64::new(eig.eigenvalues[i].exp(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            return Self {
                m: v * diag * v.adjoint(),
            };
        }
        if self.is_normal(1e-12 * scale * scale) {
            if let Some(schur) = Schur::try_new(self.m.clone(), 1e-15, 10_000) {
                let (q, t) = schur.unpack();
                let off_diag = (0..d)
                    .flat_map(|i| (0..i).map(move |j| (i, j)))
                    .chain((0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))))
                    .map(|(i, j)| t[(i, j)].norm())
                    .fold(0.0, f64::max);
                if off_diag <= 1e-10 * scale {
                    let diag = DMatrix::from_fn(d, d, |i, j| {
                        if i == j {
                            t[(i, i)].exp()
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    });
                    return Self {
                        m: &q * diag * q.adjoint(),
                    };
                }
            }
        }
        self.exp_taylor()
    }

    fn exp_taylor(&self) -> Operator {
        let d = self.dim();
        let norm1 = (0..d)
            .map(|j| self.m.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let squarings = if norm1 > 0.5 {
            (norm1 / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let a = &self.m * C64::new(0.5f64.powi(squarings), 0.0);
        let mut term = DMatrix::<C64>::identity(d, d);
        let mut sum = term.clone();
        for k in 1..=60 {
            term = &term * &a * C64::new(1.0 / k as f64, 0.0);
            sum += &term;
            let t = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let s = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if t <= 1e-18 * s {
                break;
            }
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        Self { m: sum }
    }

    /// `A |psi>`
    pub fn apply(&self, psi: &PureState) -> PureState {
        PureState {
            amps: &self.m * &psi.amps,
        }
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Operator> for &Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator { m: &self.m $op &rhs.m }
            }
        }
        impl $tr<Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: Operator) -> Operator {
                Operator { m: self.m $op rhs.m }
            }
        }
        impl $tr<&Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator { m: self.m $op &rhs.m }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        Operator { m: self.m * rhs }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -self.m }
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.m += &rhs.m;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pauli matrix for `axis`, with `sigma_z = |0><0| - |1><1|`.
pub fn pauli(axis: Axis) -> Operator {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let rows = match axis {
        Axis::X => vec![vec![o, l], vec![l, o]],
        Axis::Y => vec![vec![o, -I], vec![I, o]],
        Axis::Z => vec![vec![l, o], vec![o, -l]],
    };
    Operator::from_rows(&rows).expect("2x2 literal")
}

/// Qubit lowering operator `sigma_x - i sigma_y = 2 |1><0|`.
pub fn sigma_minus() -> Operator {
    pauli(Axis::X) - pauli(Axis::Y).scale(I)
}

/// Truncated bosonic lowering operator with `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation operator needs dim >= 2, got {dim}"
        )));
    }
    let mut a = Operator::zeros(dim);
    for n in 1..dim {
        a.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    Ok(a)
}

/// Quadratures `x = (a + a^dag)/sqrt2` and `p = (a - a^dag)/(i sqrt2)`.
pub fn quadratures(a: &Operator) -> (Operator, Operator) {
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (a + &ad).scale_real(s);
    let p = (a - &ad).scale(C64::new(0.0, -s));
    (x, p)
}

/// A uniform time grid `[0, spacing * cells]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub spacing: f64,
    pub cells: usize,
}

impl Grid {
    pub fn end(&self) -> f64 {
        self.spacing * self.cells as f64
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.spacing
    }

    fn cell(&self, t: f64) -> Option<usize> {
        let end = self.end();
        let slack = COVER_SLACK * end.max(1.0);
        if t < -slack || t > end + slack {
            return None;
        }
        let k = (t / self.spacing).floor().max(0.0) as usize;
        Some(k.min(self.cells - 1))
    }
}

/// Merges the grids of several schedules. Constant schedules impose no grid;
/// piecewise schedules must agree exactly.
pub fn common_grid<I>(grids: I) -> Result<Option<Grid>>
where
    I: IntoIterator<Item = Option<Grid>>,
{
    let mut found: Option<Grid> = None;
    for g in grids.into_iter().flatten() {
        match found {
            None => found = Some(g),
            Some(f) if f.cells == g.cells && (f.spacing - g.spacing).abs() <= 1e-15 * f.spacing => {}
            Some(f) => {
                return Err(Error::ScheduleMismatch(format!(
                    "grid {}x{} vs {}x{}",
                    f.cells, f.spacing, g.cells, g.spacing
                )))
            }
        }
    }
    Ok(found)
}

/// A value that is constant in time or piecewise constant on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule<T> {
    Constant(T),
    Piecewise { spacing: f64, values: Vec<T> },
}

pub type OperatorSchedule = Schedule<Operator>;

impl<T> Schedule<T> {
    pub fn piecewise(spacing: f64, values: Vec<T>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || values.is_empty() {
            return Err(Error::InvalidArgument(
                "piecewise schedule needs a positive spacing and at least one value".into(),
            ));
        }
        Ok(Schedule::Piecewise { spacing, values })
    }

    pub fn grid(&self) -> Option<Grid> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::Piecewise { spacing, values } => Some(Grid {
                spacing: *spacing,
                cells: values.len(),
            }),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }

    /// Last covered time; infinite for constant schedules.
    pub fn end(&self) -> f64 {
        self.grid().map_or(f64::INFINITY, |g| g.end())
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        match self.grid() {
            None => true,
            Some(g) => g.cell(t0).is_some() && g.cell(t1).is_some(),
        }
    }

    /// Index of the cell containing `t` (always 0 for constant schedules).
    pub fn cell_index(&self, t: f64) -> Result<usize> {
        match self.grid() {
            None => Ok(0),
            Some(g) => g.cell(t).ok_or(Error::Domain {
                t0: t,
                t1: t,
                end: g.end(),
            }),
        }
    }

    pub fn at(&self, t: f64) -> Result<&T> {
        let k = self.cell_index(t)?;
        Ok(&self.values()[k])
    }

    /// The distinct values: one for constant schedules, one per cell otherwise.
    pub fn values(&self) -> &[T] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::Piecewise { values, .. } => values,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Schedule<U> {
        match self {
            Schedule::Constant(v) => Schedule::Constant(f(v)),
            Schedule::Piecewise { spacing, values } => Schedule::Piecewise {
                spacing: *spacing,
                values: values.iter().map(f).collect(),
            },
        }
    }

    /// Evaluates `f` at every cell midpoint of `grid` (or at `t = 0` when
    /// there is no grid, producing a constant schedule).
    pub fn from_grid(grid: Option<Grid>, mut f: impl FnMut(f64) -> Result<T>) -> Result<Self> {
        match grid {
            None => Ok(Schedule::Constant(f(0.0)?)),
            Some(g) => {
                let values = (0..g.cells)
                    .map(|k| f(g.midpoint(k)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Schedule::Piecewise {
                    spacing: g.spacing,
                    values,
                })
            }
        }
    }
}

impl OperatorSchedule {
    /// Common dimension of every operator in the schedule.
    pub fn dim(&self) -> Result<usize> {
        let d = self.values()[0].dim();
        for v in self.values() {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.dim(),
                });
            }
        }
        Ok(d)
    }
}

impl From<Operator> for OperatorSchedule {
    fn from(op: Operator) -> Self {
        Schedule::Constant(op)
    }
}

/// Caches `exp(-i K(t_mid) h)` per schedule cell for fixed-step propagation.
pub(crate) struct MidpointStepper<'a> {
    schedule: &'a OperatorSchedule,
    h: f64,
    cache: Vec<Option<Operator>>,
}

impl<'a> MidpointStepper<'a> {
    pub(crate) fn new(schedule: &'a OperatorSchedule, h: f64) -> Self {
        Self {
            schedule,
            h,
            cache: vec![None; schedule.values().len()],
        }
    }

    /// Propagator for the step starting at `t`.
    pub(crate) fn step(&mut self, t: f64) -> Result<&Operator> {
        let k = self.schedule.cell_index(t + 0.5 * self.h)?;
        if self.cache[k].is_none() {
            let gen = &self.schedule.values()[k];
            self.cache[k] = Some(gen.scale(C64::new(0.0, -self.h)).exp());
        }
        Ok(self.cache[k].as_ref().expect("filled above"))
    }
}

/// Time-ordered exponential `T exp(-i int_{t0}^{t1} K dt)`.
///
/// Each of the `steps` substeps uses the exact exponential of the generator
/// at the substep midpoint. Constant generators are exponentiated in one go.
pub fn time_ordered_propagator(
    k: &OperatorSchedule,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Operator> {
    if !(t1 >= t0) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need t1 >= t0 and steps >= 1 (t0 = {t0}, t1 = {t1}, steps = {steps})"
        )));
    }
    if !k.covers(t0, t1) {
        return Err(Error::Domain {
            t0,
            t1,
            end: k.end(),
        });
    }
    let d = k.dim()?;
    if let Schedule::Constant(gen) = k {
        return Ok(gen.scale(C64::new(0.0, -(t1 - t0))).exp());
    }
    let h = (t1 - t0) / steps as f64;
    let mut stepper = MidpointStepper::new(k, h);
    let mut u = Operator::identity(d);
    for n in 0..steps {
        let s = stepper.step(t0 + n as f64 * h)?;
        u = s * &u;
    }
    Ok(u)
}

/// `out = m x` on raw column-major storage, without allocating.
pub(crate) fn matvec_into(m: &DMatrix<C64>, x: &[C64], out: &mut [C64]) {
    let d = x.len();
    out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
    for (j, col) in m.as_slice().chunks_exact(d).enumerate() {
        let xj = x[j];
        for (o, a) in out.iter_mut().zip(col) {
            *o += a * xj;
        }
    }
}

/// A (possibly unnormalized) pure state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: DVector<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("empty state vector".into()));
        }
        Ok(Self {
            amps: DVector::from_vec(amplitudes),
        })
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidDimension(format!("basis index {k} >= dim {dim}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`
    pub fn from_bloch(angles: BlochAngles) -> Self {
        let (s, c) = (0.5 * angles.theta).sin_cos();
        Self {
            amps: DVector::from_vec(vec![
                C64::new(c, 0.0),
                C64::from_polar(s, angles.phi),
            ]),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        self.amps.as_mut_slice()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            amps: &self.amps * c,
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot normalize state of norm {n}")));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// `|psi><psi|`, without normalization.
    pub fn projector(&self) -> Operator {
        Operator {
            m: &self.amps * self.amps.adjoint(),
        }
    }

    /// Bloch angles of a qubit state, ignoring norm and global phase.
    pub fn to_bloch(&self) -> Result<BlochAngles> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            });
        }
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("zero state has no Bloch angles".into()));
        }
        let (a, b) = (self.amps[0] / n, self.amps[1] / n);
        let theta = 2.0 * b.norm().atan2(a.norm());
        let phi = if a.norm() < 1e-300 || b.norm() < 1e-300 {
            0.0
        } else {
            b.arg() - a.arg()
        };
        BlochAngles::new(theta, phi)
    }
}

/// Polar angle in `[0, pi]` and azimuth in `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    /// Validates `theta` and wraps `phi` into `[0, 2 pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(-1e-12..=PI + 1e-12).contains(&theta) || !phi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Bloch angles out of range: theta = {theta}, phi = {phi}"
            )));
        }
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Ok(Self {
            theta: theta.clamp(0.0, PI),
            phi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_z_is_diag() {
        assert_eq!(pauli(Axis::Z), Operator::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]));
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli(Axis::X), pauli(Axis::Y), pauli(Axis::Z));
        assert_eq!(&x * &x, Operator::identity(2));
        let comm = Operator::commutator(&x, &y);
        assert!(comm.distance(&z.scale(c(0.0, 2.0))) < 1e-15);
    }

    #[test]
    fn annihilation_ladder() {
        let a = annihilation(2).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        assert_eq!(a.apply(&one), PureState::basis(2, 0).unwrap());

        let a4 = annihilation(4).unwrap();
        assert_eq!(a4.get(2, 3), c(3f64.sqrt(), 0.0));
        assert!(annihilation(1).is_err());
    }

    #[test]
    fn annihilation_commutator_block() {
        // Brute force: [a, a^dag] at dim 6 is identity except the truncated last level.
        let d = 6;
        let a = annihilation(d).unwrap();
        let comm = Operator::commutator(&a, &a.adjoint());
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j && i < d - 1 { 1.0 } else { 0.0 };
                if i < d - 1 && j < d - 1 {
                    assert!((comm.get(i, j) - c(expect, 0.0)).norm() < 1e-14);
                }
            }
        }
        assert!((comm.get(d - 1, d - 1) - c(-((d - 1) as f64), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hermiticity_predicate() {
        let z = pauli(Axis::Z);
        assert!(z.is_hermitian(1e-12));
        assert!(!z.scale(I).is_hermitian(1e-12));
        let f = c(0.3, -0.2);
        assert!(!sigma_minus().scale(f.conj()).is_hermitian(1e-12));
        assert!(!sigma_minus().scale(f.conj()).is_hermitian(0.5));
    }

    #[test]
    fn propagator_full_precession_is_minus_identity() {
        let omega = 1.3;
        let k: OperatorSchedule = pauli(Axis::Z).scale_real(omega / 2.0).into();
        let u = time_ordered_propagator(&k, 0.0, 2.0 * PI / omega, 4096).unwrap();
        assert!(u.distance(&Operator::identity(2).scale_real(-1.0)) < 1e-12);
    }

    #[test]
    fn propagator_zero_generator() {
        let k: OperatorSchedule = Operator::zeros(3).into();
        let u = time_ordered_propagator(&k, 0.0, 1.0, 10).unwrap();
        assert_eq!(u, Operator::identity(3));
    }

    #[test]
    fn propagator_damped_precession_closed_form() {
        let (omega, lambda, t) = (1.0, 0.1, 1.0);
        let gen = pauli(Axis::Z).scale_real(omega / 2.0) - Operator::identity(2).scale(c(0.0, lambda / 2.0));
        let expect = Operator::diagonal(&[
            C64::from_polar((-lambda * t / 2.0).exp(), -omega * t / 2.0),
            C64::from_polar((-lambda * t / 2.0).exp(), omega * t / 2.0),
        ]);
        let k: OperatorSchedule = gen.into();
        let u = time_ordered_propagator(&k, 0.0, t, 4096).unwrap();
        assert!(u.distance(&expect) < 1e-14);
        // the piecewise path with identical cells must agree
        let pw = Schedule::piecewise(t / 8.0, vec![k.values()[0].clone(); 8]).unwrap();
        let u2 = time_ordered_propagator(&pw, 0.0, t, 64).unwrap();
        assert!(u2.distance(&expect) < 1e-13);
    }

    #[test]
    fn propagator_domain_error() {
        let pw = Schedule::piecewise(0.5, vec![pauli(Axis::X), pauli(Axis::Z)]).unwrap();
        assert!(matches!(
            time_ordered_propagator(&pw, 0.0, 2.0, 10),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn exp_non_normal_matches_series() {
        // nilpotent: exp(N) = 1 + N
        let n = Operator::from_rows(&[vec![c(0.0, 0.0), c(2.0, 1.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let e = n.exp();
        assert!(e.distance(&(Operator::identity(2) + &n)) < 1e-15);
    }

    #[test]
    fn exp_hermitian_and_normal_paths_agree_with_taylor() {
        let x = pauli(Axis::X).scale_real(0.7) + pauli(Axis::Y).scale_real(-0.4);
        assert!(x.exp().distance(&x.exp_taylor()) < 1e-13);
        let nrm = x.scale(c(0.2, -1.1));
        assert!(nrm.exp().distance(&nrm.exp_taylor()) < 1e-13);
    }

    #[test]
    fn bloch_round_trip() {
        let a = BlochAngles::new(1.1, 4.0).unwrap();
        let b = PureState::from_bloch(a).to_bloch().unwrap();
        assert!((a.theta - b.theta).abs() < 1e-12 && (a.phi - b.phi).abs() < 1e-12);
    }

    #[test]
    fn quadratures_are_hermitian() {
        let (x, p) = quadratures(&annihilation(5).unwrap());
        assert!(x.is_hermitian(1e-14) && p.is_hermitian(1e-14));
    }
}
