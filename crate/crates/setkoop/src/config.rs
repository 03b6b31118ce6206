//! Scenario files.
//!
//! A scenario is a TOML document with the sections `system`, `controls`,
//! `grid`, `observable`, `time` and a `[[checks]]` array. Unknown keys are
//! rejected. See the README for the full schema.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use setkoop_core::{
    ControlSampleSet, ControlSignal, DMatrix, Observable, PrimitiveField, SpatialGrid, VectorField,
};

use crate::registry;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub system: SystemSpec,
    #[serde(default)]
    pub controls: ControlsSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub observable: ObservableSpec,
    pub time: TimeSpec,
    pub checks: Vec<CheckSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("setkoop-out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `ẋ = a x + u`.
    ScalarAffine { a: f64 },
    /// `ẋ = (A + B K) x` over the listed gains `K`; matrices are row lists.
    LinearFeedback {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        feedbacks: Vec<Vec<Vec<f64>>>,
    },
    /// `ẋ = f₀(x) + Σₖ uₖ fₖ(x)`.
    ControlAffine {
        dim: usize,
        drift: PrimitiveSpec,
        inputs: Vec<PrimitiveSpec>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSpec {
    Zero,
    Constant { value: Vec<f64> },
    Linear { matrix: Vec<Vec<f64>> },
    Sine,
    Pendulum,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsSpec {
    /// Sampled control values. Omitted for `linear_feedback`, whose controls
    /// are the gains.
    pub points: Option<Vec<Vec<f64>>>,
    /// Segments of the random signals.
    #[serde(default = "one")]
    pub segments: usize,
    /// Random piecewise-constant signals added to the constant ones.
    #[serde(default)]
    pub random_signals: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: usize,
}

/// Bump observable `(1 − |x − c|²/r²)²`. Defaults to the box centre and the
/// largest radius fitting the box.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub tau: f64,
    pub t: f64,
    pub step: f64,
    /// Generator sequence `h_k = h0 · h_factor^k`, `k < h_count`.
    pub h0: f64,
    pub h_factor: f64,
    pub h_count: usize,
    /// Switch time of the semigroup check; defaults to the midpoint of `[tau, t]`.
    pub s: Option<f64>,
    /// Spacing of the transport curve.
    #[serde(default = "default_dtau")]
    pub dtau: f64,
}

fn default_dtau() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    pub tolerance: Option<f64>,
}

/// A validated scenario with every core object built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub field: VectorField,
    pub controls: ControlSampleSet,
    /// Constant signals first, then the random ones.
    pub signals: Vec<ControlSignal>,
    pub grid: SpatialGrid,
    pub center: Vec<f64>,
    pub radius: f64,
    pub phi: Observable,
    pub horizon: f64,
    pub tau: f64,
    pub t: f64,
    pub s: f64,
    pub step: f64,
    pub dtau: f64,
    pub h_values: Vec<f64>,
    pub seed: u64,
    /// `(name, tolerance)` in file order.
    pub checks: Vec<(String, f64)>,
}

impl Setup {
    pub fn is_linear_feedback(&self) -> bool {
        matches!(self.field, VectorField::LinearFeedback { .. })
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Validates the scenario and builds the field, controls, signals and grid.
    pub fn build(&self) -> Result<Setup, ConfigError> {
        let field = self.system.build()?;
        let d = field.state_dim();

        let controls = match (&self.system, &self.controls.points) {
            (SystemSpec::LinearFeedback { .. }, None) => {
                field.feedback_controls().map_err(core_err)?
            }
            (SystemSpec::LinearFeedback { .. }, Some(_)) => {
                return invalid(
                    "linear_feedback takes its controls from the gains; drop controls.points",
                )
            }
            (_, None) => return invalid("controls.points is required"),
            (_, Some(points)) => ControlSampleSet::new(points.clone()).map_err(core_err)?,
        };
        if controls.dim() != field.control_dim() {
            return invalid(format!(
                "controls have dimension {}, the system expects {}",
                controls.dim(),
                field.control_dim()
            ));
        }

        let time = &self.time;
        let finite = [
            time.horizon,
            time.tau,
            time.t,
            time.step,
            time.h0,
            time.h_factor,
            time.dtau,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid("time values must be finite");
        }
        if !(time.horizon > 0.0) {
            return invalid("time.horizon must be positive");
        }
        if !(0.0 <= time.tau && time.tau <= time.t && time.t <= time.horizon) {
            return invalid("need 0 <= tau <= t <= horizon");
        }
        if !(time.step > 0.0) || !(time.dtau > 0.0) {
            return invalid("time.step and time.dtau must be positive");
        }
        if !(time.h0 > 0.0 && time.h_factor > 0.0 && time.h_factor < 1.0) {
            return invalid("the h sequence needs h0 > 0 and 0 < h_factor < 1");
        }
        if time.h_count < 2 {
            return invalid("time.h_count must be at least 2");
        }
        if time.tau + time.h0 > time.horizon {
            return invalid("tau + h0 exceeds the horizon");
        }
        let s = time.s.unwrap_or(0.5 * (time.tau + time.t));
        if !(time.tau <= s && s <= time.t) {
            return invalid("time.s must lie in [tau, t]");
        }
        let h_values: Vec<f64> = (0..time.h_count)
            .map(|k| time.h0 * time.h_factor.powi(k as i32))
            .collect();

        let grid_spec = &self.grid;
        if grid_spec.lower.len() != d || grid_spec.upper.len() != d {
            return invalid(format!("grid bounds must have {d} entries"));
        }
        let grid = SpatialGrid::new(
            grid_spec.lower.clone(),
            grid_spec.upper.clone(),
            grid_spec.points_per_axis,
        )
        .map_err(core_err)?;

        let center = match &self.observable.center {
            Some(c) if c.len() != d => {
                return invalid(format!("observable.center must have {d} entries"))
            }
            Some(c) => c.clone(),
            None => grid_spec
                .lower
                .iter()
                .zip(&grid_spec.upper)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        };
        let radius = match self.observable.radius {
            Some(r) => r,
            None => grid_spec
                .lower
                .iter()
                .zip(&grid_spec.upper)
                .map(|(a, b)| 0.5 * (b - a))
                .fold(f64::INFINITY, f64::min),
        };
        let phi = Observable::bump(center.clone(), radius).map_err(core_err)?;

        let mut signals = controls.constant_signals(time.horizon).map_err(core_err)?;
        if self.controls.random_signals > 0 {
            signals.extend(
                controls
                    .random_signals(
                        time.horizon,
                        self.controls.segments,
                        self.controls.random_signals,
                        self.controls.seed,
                    )
                    .map_err(core_err)?,
            );
        }

        if self.checks.is_empty() {
            return invalid("no checks listed");
        }
        let mut seen = BTreeSet::new();
        let mut checks = Vec::with_capacity(self.checks.len());
        for c in &self.checks {
            let Some(info) = registry::find(&c.name) else {
                return invalid(format!("unknown check {:?}", c.name));
            };
            if !seen.insert(c.name.as_str()) {
                return invalid(format!("check {:?} listed twice", c.name));
            }
            let tolerance = c.tolerance.unwrap_or(info.default_tolerance);
            // Zero is allowed and demands an exact result.
            if !(tolerance >= 0.0) || !tolerance.is_finite() {
                return invalid(format!("tolerance of {:?} must be nonnegative", c.name));
            }
            if info.needs_linear_feedback
                && !matches!(self.system, SystemSpec::LinearFeedback { .. })
            {
                return invalid(format!("check {:?} needs a linear_feedback system", c.name));
            }
            checks.push((c.name.clone(), tolerance));
        }

        Ok(Setup {
            field,
            controls,
            signals,
            grid,
            center,
            radius,
            phi,
            horizon: time.horizon,
            tau: time.tau,
            t: time.t,
            s,
            step: time.step,
            dtau: time.dtau,
            h_values,
            seed: self.controls.seed,
            checks,
        })
    }
}

fn core_err(e: setkoop_core::Error) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return invalid(format!("{what} must be a nonempty rectangular matrix"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return invalid(format!("{what} has non-finite entries"));
    }
    Ok(DMatrix::from_row_iterator(
        n,
        m,
        rows.iter().flatten().copied(),
    ))
}

impl SystemSpec {
    fn build(&self) -> Result<VectorField, ConfigError> {
        match self {
            SystemSpec::ScalarAffine { a } => {
                if !a.is_finite() {
                    return invalid("system.a must be finite");
                }
                Ok(VectorField::scalar_affine(*a))
            }
            SystemSpec::LinearFeedback { a, b, feedbacks } => {
                let gains = feedbacks
                    .iter()
                    .map(|k| matrix(k, "feedback"))
                    .collect::<Result<Vec<_>, _>>()?;
                VectorField::linear_feedback(matrix(a, "system.a")?, matrix(b, "system.b")?, gains)
                    .map_err(core_err)
            }
            SystemSpec::ControlAffine { dim, drift, inputs } => {
                let inputs = inputs
                    .iter()
                    .map(PrimitiveSpec::build)
                    .collect::<Result<Vec<_>, _>>()?;
                VectorField::control_affine(*dim, drift.build()?, inputs).map_err(core_err)
            }
        }
    }
}

impl PrimitiveSpec {
    fn build(&self) -> Result<PrimitiveField, ConfigError> {
        Ok(match self {
            PrimitiveSpec::Zero => PrimitiveField::Zero,
            PrimitiveSpec::Constant { value } => PrimitiveField::Constant(value.clone()),
            PrimitiveSpec::Linear { matrix: rows } => {
                PrimitiveField::Linear(matrix(rows, "linear primitive")?)
            }
            PrimitiveSpec::Sine => PrimitiveField::Sine,
            PrimitiveSpec::Pendulum => PrimitiveField::Pendulum,
        })
    }
}
