//! Hyperbolic growth `S(t) = 1 / (a - k t)`, its reciprocal straight line,
//! and the exponential law used as a semilog comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TimeSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    /// `a - k t <= 0`: the trajectory has already escaped to infinity.
    #[error("year {t} is at or beyond the singularity (trajectory escapes to infinity at year {singularity})")]
    BeyondSingularity { t: f64, singularity: f64 },
    #[error("no finite-time singularity: slope k = {k} is not positive")]
    NoSingularity { k: f64 },
}

/// Parameters of the reciprocal line `1/S = a - k t`.
///
/// `a` is in 1/GDP units and `k` in 1/(GDP·year). A growing series has
/// `a > 0` and `k > 0`; evaluation also accepts `k = 0` (constant `1/a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicParams {
    pub a: f64,
    pub k: f64,
}

impl HyperbolicParams {
    pub fn new(a: f64, k: f64) -> Self {
        Self { a, k }
    }

    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        eval_hyperbolic(self, t)
    }

    pub fn reciprocal(&self, t: f64) -> f64 {
        reciprocal_line(self, t)
    }

    pub fn singularity_time(&self) -> Result<f64, ModelError> {
        singularity_time(self)
    }
}

/// `S(t) = s0 · exp(r (t - t_ref))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialParams {
    pub s0: f64,
    pub r: f64,
    pub t_ref: f64,
}

/// Evaluates `(a - k t)^-1`.
pub fn eval_hyperbolic(params: &HyperbolicParams, t: f64) -> Result<f64, ModelError> {
    let denom = reciprocal_line(params, t);
    if denom > 0.0 {
        Ok(1.0 / denom)
    } else {
        Err(ModelError::BeyondSingularity {
            t,
            singularity: params.a / params.k,
        })
    }
}

/// `a - k t`, defined for every `t`.
pub fn reciprocal_line(params: &HyperbolicParams, t: f64) -> f64 {
    params.a - params.k * t
}

/// Year `a / k` at which the hyperbola diverges.
pub fn singularity_time(params: &HyperbolicParams) -> Result<f64, ModelError> {
    if params.k > 0.0 {
        Ok(params.a / params.k)
    } else {
        Err(ModelError::NoSingularity { k: params.k })
    }
}

pub fn eval_exponential(params: &ExponentialParams, t: f64) -> f64 {
    params.s0 * (params.r * (t - params.t_ref)).exp()
}

/// Replaces each value by its reciprocal. The unit is annotated as `1/(unit)`,
/// and annotating twice restores the original unit.
pub fn reciprocal_series(series: &TimeSeries) -> TimeSeries {
    let unit = reciprocal_unit(series.unit());
    series
        .map_values(|v| 1.0 / v)
        .expect("reciprocal of a positive finite value is positive")
        .with_unit(unit)
}

fn reciprocal_unit(unit: &str) -> String {
    match unit.strip_prefix("1/(").and_then(|u| u.strip_suffix(')')) {
        Some(inner) => inner.to_string(),
        None => format!("1/({unit})"),
    }
}
