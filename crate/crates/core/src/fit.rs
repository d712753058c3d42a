//! Least-squares estimation of hyperbolic and exponential growth.
//!
//! A hyperbola is fitted as a straight line through the reciprocal values
//! `1/S`; an exponential as a straight line through `ln S`. Years are
//! centered on their (weighted) mean before solving the normal equations and
//! the coefficients are mapped back to raw calendar years.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{slice, TimeSeries, WindowSpec};
use crate::model::{eval_exponential, ExponentialParams, HyperbolicParams};

/// Fewest points for which residual statistics are reported.
pub const MIN_POINTS: usize = 3;

/// Reciprocal-space RMSE at or below this fraction of the RMS reciprocal
/// value is treated as an exact fit (floating-point round-off only).
pub const EXACT_FIT_RELATIVE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient data: {n} points in window {window}, need at least {MIN_POINTS}")]
    InsufficientData { n: usize, window: WindowSpec },
    #[error("series is not growing hyperbolically: fitted reciprocal slope gives k = {k:e} (must be positive)")]
    NonGrowing { k: f64 },
    #[error("pathological fit: singularity at year {singularity} falls inside the fitted range {window}")]
    SingularityInWindow {
        singularity: f64,
        window: WindowSpec,
    },
    #[error("fit does not belong to series: year {year} not found")]
    SeriesMismatch { year: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Ordinary least squares on `1/S`.
    #[default]
    Uniform,
    /// Weights `S^4`; to first order this is least squares on raw `S`.
    ValueSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Hyperbolic(HyperbolicParams),
    Exponential(ExponentialParams),
}

impl ModelParams {
    pub fn as_hyperbolic(&self) -> Option<&HyperbolicParams> {
        match self {
            ModelParams::Hyperbolic(p) => Some(p),
            ModelParams::Exponential(_) => None,
        }
    }

    pub fn as_exponential(&self) -> Option<&ExponentialParams> {
        match self {
            ModelParams::Exponential(p) => Some(p),
            ModelParams::Hyperbolic(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub year: f64,
    pub residual: f64,
}

/// One model fitted on one window.
///
/// `residuals`, `rmse_transformed` and `r_squared_transformed` live in the
/// fitting space (reciprocal for hyperbolic, log for exponential);
/// `sse_raw` is in GDP units and is `None` when the fitted curve is not
/// positive at every fitted year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub window: WindowSpec,
    pub n: usize,
    pub rmse_transformed: f64,
    pub r_squared_transformed: f64,
    pub residuals: Vec<Residual>,
    pub sse_raw: Option<f64>,
}

impl FitResult {
    pub fn hyperbolic(&self) -> Option<&HyperbolicParams> {
        self.params.as_hyperbolic()
    }

    /// Sum of squared residuals in the fitting space.
    pub fn sse_transformed(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual * r.residual).sum()
    }
}

/// Straight line `y = intercept + slope · x` from weighted least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Weighted least-squares line with centered abscissae. Requires at least two
/// distinct `x` values.
pub(crate) fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Line {
    debug_assert_eq!(x.len(), y.len());
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sum_w: f64 = (0..x.len()).map(weight).sum();
    let x_mean = (0..x.len()).map(|i| weight(i) * x[i]).sum::<f64>() / sum_w;
    let y_mean = (0..x.len()).map(|i| weight(i) * y[i]).sum::<f64>() / sum_w;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - x_mean;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * (y[i] - y_mean);
    }
    let slope = sxy / sxx;
    Line {
        intercept: y_mean - slope * x_mean,
        slope,
    }
}

fn r_squared(y: &[f64], fitted: &[f64], w: Option<&[f64]>) -> f64 {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sum_w: f64 = (0..y.len()).map(weight).sum();
    let y_mean = (0..y.len()).map(|i| weight(i) * y[i]).sum::<f64>() / sum_w;
    let sst: f64 = (0..y.len())
        .map(|i| weight(i) * (y[i] - y_mean).powi(2))
        .sum();
    let sse: f64 = (0..y.len())
        .map(|i| weight(i) * (y[i] - fitted[i]).powi(2))
        .sum();
    if sst == 0.0 {
        return if sse == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - sse / sst).clamp(0.0, 1.0)
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn checked_slice(series: &TimeSeries, window: &WindowSpec) -> Result<TimeSeries, FitError> {
    let sliced = slice(series, window);
    if sliced.len() < MIN_POINTS {
        return Err(FitError::InsufficientData {
            n: sliced.len(),
            window: *window,
        });
    }
    Ok(sliced)
}

fn fitted_range(series: &TimeSeries) -> WindowSpec {
    WindowSpec {
        t_min: series.first_year(),
        t_max: series.last_year(),
    }
}

/// Straight line through `1/S` on the window, without any growth checks.
/// Used for regime segments where a flat or rising reciprocal is a valid
/// outcome. Needs at least two points.
pub(crate) fn reciprocal_line_fit(sliced: &TimeSeries, weighting: Weighting) -> FitResult {
    let years = sliced.years();
    let recips: Vec<f64> = sliced.values().iter().map(|v| 1.0 / v).collect();
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Uniform => None,
        Weighting::ValueSquared => {
            let max = sliced.values().iter().copied().fold(0.0, f64::max);
            Some(sliced.values().iter().map(|v| (v / max).powi(4)).collect())
        }
    };
    let line = fit_line(years, &recips, weights.as_deref());
    let params = HyperbolicParams::new(line.intercept, -line.slope);
    let fitted: Vec<f64> = years.iter().map(|&t| line.at(t)).collect();

    let residuals: Vec<Residual> = years
        .iter()
        .zip(recips.iter().zip(&fitted))
        .map(|(&year, (y, f))| Residual {
            year,
            residual: y - f,
        })
        .collect();
    let sse_raw = if fitted.iter().all(|&f| f > 0.0) {
        Some(
            sliced
                .values()
                .iter()
                .zip(&fitted)
                .map(|(s, f)| (s - 1.0 / f).powi(2))
                .sum(),
        )
    } else {
        None
    };
    FitResult {
        params: ModelParams::Hyperbolic(params),
        window: fitted_range(sliced),
        n: sliced.len(),
        rmse_transformed: rms(residuals.iter().map(|r| r.residual)),
        r_squared_transformed: r_squared(&recips, &fitted, weights.as_deref()),
        residuals,
        sse_raw,
    }
}

/// Fits `S(t) = 1/(a - k t)` by least squares on the reciprocal values
/// inside `window`.
pub fn fit_hyperbolic(
    series: &TimeSeries,
    window: &WindowSpec,
    weighting: Weighting,
) -> Result<FitResult, FitError> {
    let sliced = checked_slice(series, window)?;
    let fit = reciprocal_line_fit(&sliced, weighting);
    let params = *fit.hyperbolic().expect("reciprocal fit is hyperbolic");
    if params.k.is_nan() || params.k <= 0.0 {
        return Err(FitError::NonGrowing { k: params.k });
    }
    let last = sliced.last_year().expect("non-empty");
    if params.reciprocal(last) <= 0.0 || params.a / params.k <= last {
        return Err(FitError::SingularityInWindow {
            singularity: params.a / params.k,
            window: fit.window,
        });
    }
    Ok(fit)
}

/// Fits `S(t) = s0 · exp(r (t - t_ref))` by least squares on `ln S`, with
/// `t_ref` the first fitted year.
pub fn fit_exponential(series: &TimeSeries, window: &WindowSpec) -> Result<FitResult, FitError> {
    let sliced = checked_slice(series, window)?;
    let years = sliced.years();
    let logs: Vec<f64> = sliced.values().iter().map(|v| v.ln()).collect();
    let line = fit_line(years, &logs, None);
    let t_ref = years[0];
    let params = ExponentialParams {
        s0: line.at(t_ref).exp(),
        r: line.slope,
        t_ref,
    };
    let fitted: Vec<f64> = years.iter().map(|&t| line.at(t)).collect();
    let residuals: Vec<Residual> = years
        .iter()
        .zip(logs.iter().zip(&fitted))
        .map(|(&year, (y, f))| Residual {
            year,
            residual: y - f,
        })
        .collect();
    let sse_raw = sliced
        .points()
        .map(|(t, s)| (s - eval_exponential(&params, t)).powi(2))
        .sum();
    Ok(FitResult {
        params: ModelParams::Exponential(params),
        window: fitted_range(&sliced),
        n: sliced.len(),
        rmse_transformed: rms(residuals.iter().map(|r| r.residual)),
        r_squared_transformed: r_squared(&logs, &fitted, None),
        residuals,
        sse_raw: Some(sse_raw),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub n: usize,
    pub rmse_transformed: f64,
    pub r_squared_transformed: f64,
    pub sse_raw: Option<f64>,
    pub max_abs_standardized: f64,
    /// `residual / rmse_transformed`, or 0 for every point of an exact fit.
    pub standardized: Vec<Residual>,
}

pub fn goodness_report(fit: &FitResult, series: &TimeSeries) -> Result<GoodnessReport, FitError> {
    for r in &fit.residuals {
        if series
            .years()
            .binary_search_by(|t| t.total_cmp(&r.year))
            .is_err()
        {
            return Err(FitError::SeriesMismatch { year: r.year });
        }
    }
    let rmse = fit.rmse_transformed;
    let standardized: Vec<Residual> = fit
        .residuals
        .iter()
        .map(|r| Residual {
            year: r.year,
            residual: if rmse == 0.0 { 0.0 } else { r.residual / rmse },
        })
        .collect();
    let max_abs_standardized = standardized
        .iter()
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    Ok(GoodnessReport {
        n: fit.n,
        rmse_transformed: rmse,
        r_squared_transformed: fit.r_squared_transformed,
        sse_raw: fit.sse_raw,
        max_abs_standardized,
        standardized,
    })
}

/// RMS of `1/S` over the points of `series`.
pub(crate) fn reciprocal_scale(series: &TimeSeries) -> f64 {
    rms(series.values().iter().map(|v| 1.0 / v))
}
