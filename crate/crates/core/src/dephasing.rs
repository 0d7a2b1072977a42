//! Closed forms for the dephasing qubit `H = (omega/2) sigma_z`, `L = sigma_z`
//! with a real shift `f`.

use std::f64::consts::PI;

use crate::lindblad::{LindbladModel, ShiftSet};
use crate::operators::{pauli, sigma_minus, Axis, BlochAngles, PureState};
use crate::{Error, Result, C64};

/// Below this `|f lambda| / omega` the closed form switches to its limit.
const LIMIT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingParams {
    pub omega: f64,
    pub lambda: f64,
    pub f: f64,
    pub theta0: f64,
    pub phi0: f64,
}

impl DephasingParams {
    pub fn new(omega: f64, lambda: f64, f: f64, theta0: f64) -> Result<Self> {
        let p = Self {
            omega,
            lambda,
            f,
            theta0,
            phi0: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !self.f.is_finite() || !self.phi0.is_finite() {
            return Err(Error::InvalidArgument("f and phi0 must be finite".into()));
        }
        if !(0.0..=PI).contains(&self.theta0) {
            return Err(Error::InvalidArgument(format!("theta0 must lie in [0, pi], got {}", self.theta0)));
        }
        Ok(())
    }

    /// The unshifted dephasing model.
    pub fn model(&self) -> LindbladModel {
        LindbladModel::constant(
            pauli(Axis::Z).scale_real(0.5 * self.omega),
            vec![pauli(Axis::Z)],
            self.lambda,
        )
        .expect("2x2 dephasing model")
    }

    pub fn shifts(&self) -> ShiftSet {
        ShiftSet::uniform_real(self.f, 1)
    }

    pub fn initial_state(&self) -> PureState {
        PureState::from_bloch(BlochAngles::new(self.theta0, self.phi0).expect("validated theta0"))
    }

    /// Precession period `2 pi / omega`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

/// No-jump geometric phase of the shifted dephasing qubit over one period:
///
/// ```text
/// gamma = -pi + (omega / 4 f lambda) ln(e^{x} cos^2(theta0/2) + e^{-x} sin^2(theta0/2)),
/// x = 4 pi f lambda / omega
/// ```
///
/// and `-pi (1 - cos theta0)` in the limit `f lambda -> 0`.
pub fn gamma_nj_closed_form(p: &DephasingParams) -> f64 {
    let fl = p.f * p.lambda;
    if fl.abs() < LIMIT_CUTOFF * p.omega {
        return -PI * (1.0 - p.theta0.cos());
    }
    let x = 4.0 * PI * fl / p.omega;
    let (c2, s2) = ((0.5 * p.theta0).cos().powi(2), (0.5 * p.theta0).sin().powi(2));
    // log-sum-exp; one of the weights may vanish at the poles
    let terms = [(x, c2), (-x, s2)];
    let top = terms
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(e, _)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(e, w)| w * (e - top).exp())
        .sum();
    -PI + PI * (top + sum.ln()) / x
}

/// Lowest-order correction `2 pi^2 (f lambda / omega) sin^2 theta0` to the
/// limit `-pi (1 - cos theta0)`.
pub fn gamma_nj_small_correction(p: &DephasingParams) -> f64 {
    let x = p.f * p.lambda / p.omega;
    if x.abs() > 0.1 {
        log::warn!("f lambda / omega = {x} is outside the small-correction regime");
    }
    2.0 * PI * PI * x * p.theta0.sin().powi(2)
}

/// Bloch angles of the shifted no-jump path:
/// `tan(theta/2) = e^{-2 f lambda t} tan(theta0/2)`, `phi = phi0 + omega t`.
pub fn bloch_spiral(p: &DephasingParams, t: f64) -> BlochAngles {
    let half = (0.5 * p.theta0).sin().atan2((0.5 * p.theta0).cos() * (2.0 * p.f * p.lambda * t).exp());
    BlochAngles::new(2.0 * half, p.phi0 + p.omega * t).expect("theta in [0, pi]")
}

/// Precessing qubit decaying through `sigma_x - i sigma_y` at rate
/// `lambda' = -f lambda`. Its no-jump rays coincide with those of the shifted
/// dephasing qubit. For `f > 0` the rate is negative and the model is formal.
pub fn decay_equivalent_model(p: &DephasingParams) -> LindbladModel {
    let rate = -p.f * p.lambda;
    if rate < 0.0 {
        log::warn!("f > 0 gives the unphysical decay rate {rate}");
    }
    LindbladModel::formal(pauli(Axis::Z).scale_real(0.5 * p.omega), vec![sigma_minus()], rate)
        .expect("2x2 decay model")
}

/// Continuous argument of `<phi0| exp[-i (omega/2 + i f lambda) T sigma_z] |phi0>`,
/// tracked in `T` from `arg = 0` at `T = 0`.
///
/// The overlap is `D cos b (1 - i r tan b)` with `D > 0`, `b = omega T / 2`,
/// `r = (tanh a + cos theta0) / (1 + tanh a cos theta0)` and `a = f lambda T`.
/// On each interval `|b - n pi| < pi/2` the argument is
/// `C_n - arctan(r tan b)`, and continuity at `b = n pi + pi/2` gives
/// `C_{n+1} = C_n - pi sgn r`. Where `r = 0` there the overlap vanishes and
/// the limit `r -> 0+` is used.
pub fn qsd_overlap_closed_form(p: &DephasingParams, t: f64) -> f64 {
    let b = 0.5 * p.omega * t;
    let n = (b / PI).round() as i64;
    let sign_at_edge = |k: i64| {
        let tk = (2.0 * k as f64 + 1.0) * PI / p.omega;
        if overlap_ratio(p, tk) < 0.0 {
            -1.0
        } else {
            1.0
        }
    };
    let offset = if n >= 0 {
        -PI * (0..n).map(sign_at_edge).sum::<f64>()
    } else {
        PI * (n..0).map(sign_at_edge).sum::<f64>()
    };
    let x = b - n as f64 * PI;
    offset - (overlap_ratio(p, t) * x.sin()).atan2(x.cos())
}

/// The principal-value expression `-arctan[r tan(omega T / 2)]`. It agrees
/// with [`qsd_overlap_closed_form`] only modulo pi.
pub fn qsd_overlap_arctan_formula(p: &DephasingParams, t: f64) -> f64 {
    -(overlap_ratio(p, t) * (0.5 * p.omega * t).tan()).atan()
}

/// The complex overlap itself, for cross-checks.
pub fn qsd_overlap(p: &DephasingParams, t: f64) -> C64 {
    let a = p.f * p.lambda * t;
    let b = 0.5 * p.omega * t;
    let (c2, s2) = ((0.5 * p.theta0).cos().powi(2), (0.5 * p.theta0).sin().powi(2));
    C64::from_polar(c2 * a.exp(), -b) + C64::from_polar(s2 * (-a).exp(), b)
}

fn overlap_ratio(p: &DephasingParams, t: f64) -> f64 {
    let th = (p.f * p.lambda * t).tanh();
    let c = p.theta0.cos();
    (th + c) / (1.0 + th * c)
}

/// `int_0^T Tr[rho H] dt = (omega T / 2) cos theta0`; the populations do not
/// change under dephasing.
pub fn dynamical_term_dephasing(p: &DephasingParams, t: f64) -> f64 {
    0.5 * p.omega * t * p.theta0.cos()
}
