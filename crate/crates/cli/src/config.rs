//! Scenario files.
//!
//! A scenario is a TOML document with a model, optional shifts, an initial
//! state, run parameters and an optional sweep:
//!
//! ```toml
//! [model]
//! dim = 2
//! lambda = 0.5
//! hamiltonian = { preset = "zeeman", omega = 1.0 }
//! lindblads = [{ preset = "sigma_z" }]
//!
//! [shifts]
//! values = [[0.2, 0.0]]
//!
//! [initial_state]
//! theta = 1.5707963267948966
//!
//! [run]
//! periods = 1.0
//! steps = 4096
//!
//! [sweep.lambda]
//! start = 0.0
//! stop = 1.0
//! points = 11
//! ```
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major lists of
//! rows.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use trajphase::dephasing::DephasingParams;
use trajphase::lindblad::{LindbladModel, ShiftSet};
use trajphase::operators::{annihilation, pauli, sigma_minus, Axis, BlochAngles, Operator, PureState, Schedule};
use trajphase::C64;

use crate::error::ConfigError;

pub type Complex = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<ShiftSpec>,
    pub initial_state: StateSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, SweepAxis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub lambda: f64,
    pub hamiltonian: OperatorSpec,
    #[serde(default)]
    pub lindblads: Vec<OperatorSpec>,
}

/// A named operator or a matrix literal, optionally scaled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Complex>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    /// One constant per channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Complex>>,
    /// One piecewise-constant table per channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piecewise: Option<Vec<PiecewiseShift>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseShift {
    pub spacing: f64,
    pub values: Vec<Complex>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<Complex>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Duration in precession periods; needs the `zeeman` Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
}

/// Either explicit `values` or `points` evenly spaced from `start` to `stop`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepParam {
    Lambda,
    F,
    Theta0,
    TFinal,
}

impl SweepParam {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "lambda" => Some(Self::Lambda),
            "f" => Some(Self::F),
            "theta0" => Some(Self::Theta0),
            "t_final" => Some(Self::TFinal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::F => "f",
            Self::Theta0 => "theta0",
            Self::TFinal => "t_final",
        }
    }
}

pub const DEFAULT_DELTA_T: f64 = 1e-3;
pub const DEFAULT_TRAJECTORIES: usize = 1000;
pub const DEFAULT_CHECKPOINTS: usize = 16;

/// A fully built scenario at one sweep point.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: LindbladModel,
    pub shifts: Option<ShiftSet>,
    pub psi0: PureState,
    pub t_final: f64,
    pub steps: usize,
    pub delta_t: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub checkpoints: usize,
    /// Present when the scenario is the dephasing qubit with a real constant
    /// shift and a Bloch-angle initial state.
    pub dephasing: Option<DephasingParams>,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn c(z: &Complex) -> C64 {
    C64::new(z[0], z[1])
}

impl ScenarioConfig {
    pub fn from_toml(source: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(source).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks everything that does not depend on a sweep point.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweep.len() > 2 {
            return Err(invalid("sweep", "at most two swept parameters are supported"));
        }
        for (name, axis) in &self.sweep {
            if SweepParam::parse(name).is_none() {
                return Err(invalid(
                    format!("sweep.{name}"),
                    "unknown parameter (expected lambda, f, theta0 or t_final)",
                ));
            }
            axis.values(name)?;
        }
        self.resolve(&[]).map(|_| ())
    }

    /// Swept parameters in column order with their grids.
    pub fn sweep_axes(&self) -> Result<Vec<(SweepParam, Vec<f64>)>, ConfigError> {
        self.sweep
            .iter()
            .map(|(name, axis)| {
                let p = SweepParam::parse(name).ok_or_else(|| invalid(format!("sweep.{name}"), "unknown parameter"))?;
                Ok((p, axis.values(name)?))
            })
            .collect()
    }

    /// Every sweep point, first axis outermost. A scenario without a sweep
    /// has a single empty point.
    pub fn sweep_points(&self) -> Result<Vec<Vec<(SweepParam, f64)>>, ConfigError> {
        let mut points = vec![Vec::new()];
        for (p, values) in self.sweep_axes()? {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut next = prefix.clone();
                        next.push((p, v));
                        next
                    })
                })
                .collect();
        }
        Ok(points)
    }

    fn omega(&self) -> Option<f64> {
        let h = &self.model.hamiltonian;
        (h.preset.as_deref() == Some("zeeman")).then_some(h.omega).flatten()
    }

    /// Builds the scenario with the given parameter overrides.
    pub fn resolve(&self, overrides: &[(SweepParam, f64)]) -> Result<Scenario, ConfigError> {
        let get = |p: SweepParam| overrides.iter().find(|(q, _)| *q == p).map(|(_, v)| *v);
        let dim = self.model.dim;
        if dim < 2 {
            return Err(invalid("model.dim", "must be at least 2"));
        }
        let lambda = get(SweepParam::Lambda).unwrap_or(self.model.lambda);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("model.lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        let h = hamiltonian(&self.model.hamiltonian, dim)?;
        let ls = self
            .model
            .lindblads
            .iter()
            .enumerate()
            .map(|(k, spec)| lindblad(spec, dim, &format!("model.lindblads[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let model = LindbladModel::constant(h, ls, lambda).map_err(|e| invalid("model", e.to_string()))?;

        let shifts = match get(SweepParam::F) {
            Some(f) => Some(ShiftSet::uniform_real(f, model.channels())),
            None => self.shifts.as_ref().map(|s| s.build(model.channels())).transpose()?,
        };

        let (psi0, bloch) = self.initial_state.build(dim, get(SweepParam::Theta0))?;

        let t_final = match (get(SweepParam::TFinal), self.run.t_final, self.run.periods) {
            (Some(t), _, _) => t,
            (None, Some(_), Some(_)) => return Err(invalid("run", "give either t_final or periods, not both")),
            (None, Some(t), None) => t,
            (None, None, Some(n)) => {
                let omega = self
                    .omega()
                    .ok_or_else(|| invalid("run.periods", "needs the zeeman Hamiltonian preset"))?;
                n * 2.0 * PI / omega
            }
            (None, None, None) => return Err(invalid("run", "missing t_final or periods")),
        };
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("run.t_final", format!("must be > 0, got {t_final}")));
        }
        let steps = self.run.steps.unwrap_or(trajphase::DEFAULT_STEPS);
        if steps == 0 {
            return Err(invalid("run.steps", "must be >= 1"));
        }
        let delta_t = self.run.delta_t.unwrap_or(DEFAULT_DELTA_T);
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(invalid("run.delta_t", format!("must be > 0, got {delta_t}")));
        }
        let n_trajectories = self.run.n_trajectories.unwrap_or(DEFAULT_TRAJECTORIES);
        if n_trajectories == 0 {
            return Err(invalid("run.n_trajectories", "must be >= 1"));
        }
        let checkpoints = self.run.checkpoints.unwrap_or(DEFAULT_CHECKPOINTS);
        if checkpoints == 0 {
            return Err(invalid("run.checkpoints", "must be >= 1"));
        }

        let dephasing = self.dephasing_params(lambda, shifts.as_ref(), bloch);
        Ok(Scenario {
            model,
            shifts,
            psi0,
            t_final,
            steps,
            delta_t,
            n_trajectories,
            seed: self.run.seed.unwrap_or(0),
            checkpoints,
            dephasing,
        })
    }

    fn dephasing_params(&self, lambda: f64, shifts: Option<&ShiftSet>, bloch: Option<BlochAngles>) -> Option<DephasingParams> {
        let omega = self.omega()?;
        let [l] = self.model.lindblads.as_slice() else {
            return None;
        };
        let is_sigma_z = l.preset.as_deref() == Some("sigma_z") && l.scale.unwrap_or(1.0) == 1.0;
        if self.model.dim != 2 || !is_sigma_z || self.model.hamiltonian.scale.unwrap_or(1.0) != 1.0 {
            return None;
        }
        let f = match shifts {
            None => 0.0,
            Some(s) => match s.shifts() {
                [Schedule::Constant(z)] if z.im == 0.0 => z.re,
                _ => return None,
            },
        };
        let b = bloch?;
        DephasingParams::new(omega, lambda, f, b.theta).ok().map(|p| p.with_phi0(b.phi))
    }
}

impl SweepAxis {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        let field = format!("sweep.{name}");
        let out = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            },
            _ => return Err(invalid(field, "give either values or start, stop and points")),
        };
        if out.is_empty() {
            return Err(invalid(field, "sweep grid is empty"));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid(field, "sweep values must be finite"));
        }
        Ok(out)
    }
}

impl ShiftSpec {
    fn build(&self, channels: usize) -> Result<ShiftSet, ConfigError> {
        let set = match (&self.values, &self.piecewise) {
            (Some(v), None) => ShiftSet::constant(&v.iter().map(c).collect::<Vec<_>>()),
            (None, Some(tables)) => ShiftSet::new(
                tables
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        Schedule::piecewise(t.spacing, t.values.iter().map(c).collect())
                            .map_err(|e| invalid(format!("shifts.piecewise[{k}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => return Err(invalid("shifts", "give exactly one of values or piecewise")),
        };
        if set.len() != channels {
            return Err(invalid(
                "shifts",
                format!("{} shifts for {channels} Lindblad channels", set.len()),
            ));
        }
        Ok(set)
    }
}

impl StateSpec {
    fn build(&self, dim: usize, theta_override: Option<f64>) -> Result<(PureState, Option<BlochAngles>), ConfigError> {
        match (&self.amplitudes, self.theta.or(theta_override)) {
            (Some(a), None) => {
                if a.len() != dim {
                    return Err(invalid("initial_state.amplitudes", format!("expected {dim} amplitudes, got {}", a.len())));
                }
                let psi = PureState::new(a.iter().map(c).collect())
                    .and_then(|p| p.normalized())
                    .map_err(|e| invalid("initial_state.amplitudes", e.to_string()))?;
                Ok((psi, None))
            }
            (None, Some(theta)) => {
                if dim != 2 {
                    return Err(invalid("initial_state", "Bloch angles need dim = 2"));
                }
                let theta = theta_override.unwrap_or(theta);
                let b = BlochAngles::new(theta, self.phi.unwrap_or(0.0))
                    .map_err(|e| invalid("initial_state.theta", e.to_string()))?;
                Ok((PureState::from_bloch(b), Some(b)))
            }
            (Some(_), Some(_)) if theta_override.is_some() && self.theta.is_none() => {
                Err(invalid("sweep.theta0", "cannot sweep theta0 with an amplitude initial state"))
            }
            _ => Err(invalid("initial_state", "give either theta (and phi) or amplitudes")),
        }
    }
}

fn scaled(op: Operator, spec: &OperatorSpec) -> Operator {
    match spec.scale {
        Some(s) => op.scale_real(s),
        None => op,
    }
}

fn matrix(spec: &OperatorSpec, dim: usize, field: &str) -> Result<Operator, ConfigError> {
    let rows = spec.matrix.as_ref().expect("caller checked");
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(invalid(format!("{field}.matrix"), format!("expected a {dim}x{dim} matrix")));
    }
    let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(c).collect()).collect();
    Operator::from_rows(&rows).map_err(|e| invalid(format!("{field}.matrix"), e.to_string()))
}

fn qubit_only(name: &str, dim: usize, field: &str) -> Result<(), ConfigError> {
    if dim != 2 {
        return Err(invalid(field, format!("preset {name} needs dim = 2")));
    }
    Ok(())
}

fn check_shape(spec: &OperatorSpec, field: &str) -> Result<(), ConfigError> {
    match (&spec.preset, &spec.matrix) {
        (Some(_), None) | (None, Some(_)) => Ok(()),
        _ => Err(invalid(field, "give exactly one of preset or matrix")),
    }
}

fn hamiltonian(spec: &OperatorSpec, dim: usize) -> Result<Operator, ConfigError> {
    let field = "model.hamiltonian";
    check_shape(spec, field)?;
    let op = match spec.preset.as_deref() {
        None => matrix(spec, dim, field)?,
        Some("zeeman") => {
            qubit_only("zeeman", dim, field)?;
            let omega = spec.omega.ok_or_else(|| invalid(field, "zeeman needs omega"))?;
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(invalid(format!("{field}.omega"), format!("must be > 0, got {omega}")));
            }
            pauli(Axis::Z).scale_real(0.5 * omega)
        }
        Some("zero") => Operator::zeros(dim),
        Some("number") => {
            let a = annihilation(dim).map_err(|e| invalid(field, e.to_string()))?;
            a.adjoint() * a
        }
        Some(name) => pauli_preset(name, dim, field)?,
    };
    let op = scaled(op, spec);
    if !op.is_hermitian(1e-12) {
        return Err(invalid(field, "Hamiltonian must be Hermitian"));
    }
    Ok(op)
}

fn pauli_preset(name: &str, dim: usize, field: &str) -> Result<Operator, ConfigError> {
    let axis = match name {
        "sigma_x" => Axis::X,
        "sigma_y" => Axis::Y,
        "sigma_z" => Axis::Z,
        _ => return Err(invalid(field, format!("unknown preset {name:?}"))),
    };
    qubit_only(name, dim, field)?;
    Ok(pauli(axis))
}

fn lindblad(spec: &OperatorSpec, dim: usize, field: &str) -> Result<Operator, ConfigError> {
    check_shape(spec, field)?;
    let op = match spec.preset.as_deref() {
        None => matrix(spec, dim, field)?,
        Some("sigma_minus") => {
            qubit_only("sigma_minus", dim, field)?;
            sigma_minus()
        }
        Some("annihilation") => {
            let d = spec.dim.unwrap_or(dim);
            if d != dim {
                return Err(invalid(format!("{field}.dim"), format!("annihilation({d}) in a dim {dim} model")));
            }
            annihilation(d).map_err(|e| invalid(field, e.to_string()))?
        }
        Some(name) => pauli_preset(name, dim, field)?,
    };
    Ok(scaled(op, spec))
}

/// Scenario files shipped with the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.toml")),
    ("dephasing", include_str!("../presets/dephasing.toml")),
    ("hidden-pair", include_str!("../presets/hidden-pair.toml")),
    ("decay-shift", include_str!("../presets/decay-shift.toml")),
    ("jump-ensemble", include_str!("../presets/jump-ensemble.toml")),
    ("qsd-dephasing", include_str!("../presets/qsd-dephasing.toml")),
    ("qsd-period", include_str!("../presets/qsd-period.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, text) in PRESETS {
            let cfg = ScenarioConfig::from_toml(text, name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = ScenarioConfig::from_toml(&cfg.to_toml(), name).unwrap();
            assert_eq!(cfg, again, "{name}");
            assert_eq!(cfg.to_toml(), again.to_toml());
        }
    }

    #[test]
    fn fig1_grid() {
        let cfg = ScenarioConfig::from_toml(preset("fig1").unwrap(), "fig1").unwrap();
        let points = cfg.sweep_points().unwrap();
        assert_eq!(points.len(), 3 * 101);
        assert_eq!(points[0], vec![(SweepParam::F, 0.0), (SweepParam::Lambda, 0.0)]);
        let s = cfg.resolve(&points[150]).unwrap();
        assert!(s.dephasing.is_some());
        assert!((s.t_final - 2.0 * PI).abs() < 1e-15);
    }

    fn base() -> String {
        r#"
[model]
dim = 2
lambda = 0.5
hamiltonian = { preset = "zeeman", omega = 1.0 }
lindblads = [{ preset = "sigma_z" }]

[initial_state]
theta = 1.0

[run]
t_final = 1.0
"#
        .to_string()
    }

    #[test]
    fn errors_name_the_field() {
        let bad = base().replace("sigma_z", "sigma_q");
        let e = ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string();
        assert!(e.contains("model.lindblads[0]"), "{e}");

        let bad = base().replace("lambda = 0.5", "lambda = -1.0");
        assert!(ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string().contains("model.lambda"));

        let bad = base().replace("theta = 1.0", "theta = 1.0\nspin = 3");
        let e = ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string();
        assert!(e.contains("spin") && e.contains("line"), "{e}");

        let bad = format!("{}\n[shifts]\nvalues = [[0.1, 0.0], [0.2, 0.0]]\n", base());
        assert!(ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string().contains("shifts"));

        let bad = format!("{}\n[sweep.omega]\nvalues = [1.0]\n", base());
        assert!(ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string().contains("sweep.omega"));

        let bad = format!("{}\n[sweep.f]\nvalues = []\n", base());
        assert!(ScenarioConfig::from_toml(&bad, "t").unwrap_err().to_string().contains("empty"));
    }

    #[test]
    fn matrix_literals() {
        let text = r#"
[model]
dim = 2
lambda = 0.1
hamiltonian = { matrix = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]] }
lindblads = [{ matrix = [[[0.0, 0.0], [0.0, 0.0]], [[2.0, 0.0], [0.0, 0.0]]] }]

[initial_state]
amplitudes = [[1.0, 0.0], [0.0, 1.0]]

[run]
t_final = 2.0
"#;
        let cfg = ScenarioConfig::from_toml(text, "t").unwrap();
        let s = cfg.resolve(&[]).unwrap();
        assert!(s.model.lindblads()[0].values()[0].distance(&sigma_minus()) < 1e-15);
        assert!((s.psi0.norm() - 1.0).abs() < 1e-15);
        assert!(s.dephasing.is_none());
        let non_hermitian = text.replace("[[0.0, 0.0], [-0.5, 0.0]]", "[[1.0, 0.0], [-0.5, 0.0]]");
        let e = ScenarioConfig::from_toml(&non_hermitian, "t").unwrap_err().to_string();
        assert!(e.contains("Hermitian"), "{e}");
    }

    #[test]
    fn sweep_overrides() {
        let text = format!("{}\n[sweep.theta0]\nvalues = [0.0, 3.0]\n[sweep.t_final]\nstart = 1.0\nstop = 2.0\npoints = 3\n", base());
        let cfg = ScenarioConfig::from_toml(&text, "t").unwrap();
        let pts = cfg.sweep_points().unwrap();
        assert_eq!(pts.len(), 6);
        let s = cfg.resolve(&pts[5]).unwrap();
        assert_eq!(s.t_final, 2.0);
        assert!((s.psi0.to_bloch().unwrap().theta - 3.0).abs() < 1e-12);
        assert_eq!(s.dephasing.unwrap().theta0, 3.0);
    }
}
