//! JSON input documents and their conversion into library types.

use std::path::Path;

use nalgebra::DMatrix;
use pbcert::charroots::DelayLinearPart;
use pbcert::ddesim::{History, Interpolation};
use pbcert::freqcheck::LurjeDelaySystem;
use pbcert::parabolic::DiagonalParabolicModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TermInput {
    pub delay: f64,
    /// Rows of the matrix.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsInput {
    pub m1: Vec<Vec<f64>>,
    pub m2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CircleInput {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LurjeInput {
    pub system: String,
    pub dim: usize,
    pub terms: Vec<TermInput>,
    pub control: Vec<Vec<f64>>,
    pub measurement: Vec<TermInput>,
    pub lipschitz: f64,
    #[serde(default)]
    pub weights: Option<WeightsInput>,
    pub nu: f64,
    pub j: usize,
    #[serde(default)]
    pub circle: Option<CircleInput>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationInput {
    Linear,
    Cubic,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryInput {
    /// States at uniformly spaced times from `-τ` to `0`.
    pub samples: Vec<Vec<f64>>,
    #[serde(default = "default_interpolation")]
    pub interpolation: InterpolationInput,
}

fn default_interpolation() -> InterpolationInput {
    InterpolationInput::Linear
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinInput {
    pub system: String,
    pub tau: f64,
    pub lambda: f64,
    #[serde(default)]
    pub history: Option<HistoryInput>,
}

#[derive(Debug, Clone)]
pub enum SystemInput {
    Lurje(LurjeInput),
    Goodwin(GoodwinInput),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid { field: field.into(), message: message.into() }
}

fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid("--input", format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| invalid(".", e.inner().to_string()))
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| invalid(e.path().to_string(), e.inner().to_string()))
}

pub fn read_system(path: &Path) -> Result<SystemInput, CliError> {
    let value = read_value(path)?;
    match value.get("system").and_then(Value::as_str) {
        Some("lurje") => Ok(SystemInput::Lurje(typed(value)?)),
        Some("goodwin") => Ok(SystemInput::Goodwin(typed(value)?)),
        Some(other) => Err(invalid("system", format!("unknown system '{other}', expected 'lurje' or 'goodwin'"))),
        None => Err(invalid("system", "missing string field 'system'")),
    }
}

pub fn read_parabolic(path: &Path) -> Result<DiagonalParabolicModel, CliError> {
    let model: DiagonalParabolicModel = typed(read_value(path)?)?;
    model.validate().map_err(|e| invalid(parabolic_field(&e.to_string()), e.to_string()))?;
    Ok(model)
}

fn parabolic_field(message: &str) -> &'static str {
    if message.contains("eigenvalues") {
        "eigenvalues"
    } else if message.contains("alpha") {
        "alpha"
    } else if message.contains("Lambda") {
        "Lambda"
    } else {
        "j"
    }
}

fn matrix(rows: &[Vec<f64>], shape: (usize, usize), field: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(invalid(field, format!("expected a {}x{} matrix", shape.0, shape.1)));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

fn delay(value: f64, field: String) -> Result<f64, CliError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(field, format!("delay must be finite and non-negative, got {value}")))
    }
}

impl LurjeInput {
    pub fn build(&self) -> Result<LurjeDelaySystem, CliError> {
        let n = self.dim;
        if n == 0 {
            return Err(invalid("dim", "dimension must be positive"));
        }
        if self.terms.is_empty() {
            return Err(invalid("terms", "at least one term is required"));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, t) in self.terms.iter().enumerate() {
            let d = delay(t.delay, format!("terms[{k}].delay"))?;
            terms.push((d, matrix(&t.matrix, (n, n), &format!("terms[{k}].matrix"))?));
        }
        let linear = DelayLinearPart::new(n, terms).map_err(|e| invalid("terms", e.to_string()))?;

        let m = self.control.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(invalid("control", "control operator needs at least one column"));
        }
        let control = matrix(&self.control, (n, m), "control")?;

        if self.measurement.is_empty() {
            return Err(invalid("measurement", "at least one term is required"));
        }
        let r = self.measurement[0].matrix.len();
        if r == 0 {
            return Err(invalid("measurement[0].matrix", "measurement needs at least one row"));
        }
        let mut measurement = Vec::with_capacity(self.measurement.len());
        for (k, t) in self.measurement.iter().enumerate() {
            let d = delay(t.delay, format!("measurement[{k}].delay"))?;
            measurement.push((d, matrix(&t.matrix, (r, n), &format!("measurement[{k}].matrix"))?));
        }

        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(invalid("lipschitz", "must be positive and finite"));
        }
        if !self.nu.is_finite() {
            return Err(invalid("nu", "must be finite"));
        }
        if self.j > n {
            return Err(invalid("j", format!("cannot exceed the dimension {n}")));
        }
        let (m1, m2) = match &self.weights {
            Some(w) => (matrix(&w.m1, (m, m), "weights.m1")?, matrix(&w.m2, (r, r), "weights.m2")?),
            None => (DMatrix::identity(m, m), DMatrix::identity(r, r)),
        };
        LurjeDelaySystem::new(linear, control, measurement, self.lipschitz, &m1, &m2)
            .map_err(|e| invalid("weights", e.to_string()))
    }
}

impl GoodwinInput {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if let Some(h) = &self.history {
            if h.samples.len() < 2 {
                return Err(invalid("history.samples", "at least two samples are required"));
            }
            if h.samples.iter().any(|s| s.len() != 3) {
                return Err(invalid("history.samples", "every sample must have three components"));
            }
        }
        Ok(())
    }

    /// The given history, or a constant offset from the stationary point.
    pub fn history(&self) -> Result<History, CliError> {
        match &self.history {
            Some(h) => {
                let interp = match h.interpolation {
                    InterpolationInput::Linear => Interpolation::Linear,
                    InterpolationInput::Cubic => Interpolation::Cubic,
                };
                History::from_samples(h.samples.clone(), interp).map_err(|e| invalid("history.samples", e.to_string()))
            }
            None => {
                let phi0 = pbcert::goodwin::stationary_point(self.lambda);
                Ok(History::constant(vec![1.2 * phi0[0], 0.9 * phi0[1], 1.1 * phi0[2]]))
            }
        }
    }
}
