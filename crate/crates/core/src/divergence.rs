//! Detection of the year a series leaves its fitted hyperbolic trajectory.
//!
//! A hyperbola is fitted on an anchor window; every later observation is
//! compared with the extrapolated reciprocal line. Residuals are standardized
//! by the anchor RMSE and the onset is the first run of
//! `consecutive_required` same-signed residuals beyond `threshold_sigma`.
//! A positive residual (reciprocal above the line) means GDP fell below the
//! hyperbola: deceleration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitError, Weighting, EXACT_FIT_RELATIVE};
use crate::ingest::{slice, TimeSeries, WindowSpec};

/// Against an exact anchor, a residual counts as a deviation once it exceeds
/// this fraction of the anchor's RMS reciprocal value.
pub const EXACT_DEVIATION_RELATIVE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no observations after anchor window {anchor}")]
    NoPostAnchorData { anchor: WindowSpec },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Reciprocals bend upward: growth slower than the hyperbola.
    Deceleration,
    /// Reciprocals bend downward: growth faster than the hyperbola.
    Acceleration,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub threshold_sigma: f64,
    pub consecutive_required: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold_sigma: 2.5,
            consecutive_required: 2,
        }
    }
}

impl DetectorConfig {
    fn validate(&self) -> Result<(), DivergenceError> {
        if !(self.threshold_sigma.is_finite() && self.threshold_sigma >= 0.0) {
            return Err(DivergenceError::InvalidConfig(format!(
                "threshold_sigma must be finite and non-negative, got {}",
                self.threshold_sigma
            )));
        }
        if self.consecutive_required == 0 {
            return Err(DivergenceError::InvalidConfig(
                "consecutive_required must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Residual of one post-anchor observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub year: f64,
    /// `1/S - (a - k t)`.
    pub residual: f64,
    /// `residual / anchor_rmse`; absent when the anchor fit is exact.
    pub standardized: Option<f64>,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub onset_year: Option<f64>,
    pub direction: Direction,
    pub anchor_window: WindowSpec,
    pub threshold_sigma: f64,
    pub consecutive_required: usize,
    pub anchor_n: usize,
    pub anchor_a: f64,
    pub anchor_k: f64,
    pub anchor_rmse: f64,
    /// The anchor fit has zero residuals up to round-off; deviations are
    /// then judged against a relative tolerance instead of the RMSE.
    pub exact_anchor: bool,
    pub evidence: Vec<Evidence>,
}

pub fn detect_divergence(
    series: &TimeSeries,
    anchor: &WindowSpec,
    config: &DetectorConfig,
) -> Result<DivergenceReport, DivergenceError> {
    config.validate()?;
    let anchor_fit = fit::fit_hyperbolic(series, anchor, Weighting::Uniform)?;
    let params = *anchor_fit.hyperbolic().expect("hyperbolic fit");

    let post: Vec<(f64, f64)> = match anchor.t_max {
        Some(end) => series.points().filter(|(t, _)| *t > end).collect(),
        None => Vec::new(),
    };
    if post.is_empty() {
        return Err(DivergenceError::NoPostAnchorData { anchor: *anchor });
    }

    let scale = fit::reciprocal_scale(&slice(series, anchor));
    let rmse = anchor_fit.rmse_transformed;
    let exact_anchor = rmse <= EXACT_FIT_RELATIVE * scale;

    let evidence: Vec<Evidence> = post
        .iter()
        .map(|&(year, value)| {
            let residual = 1.0 / value - params.reciprocal(year);
            let (standardized, exceeds) = if exact_anchor {
                (None, residual.abs() > EXACT_DEVIATION_RELATIVE * scale)
            } else {
                let z = residual / rmse;
                (Some(z), z.abs() > config.threshold_sigma)
            };
            Evidence {
                year,
                residual,
                standardized,
                exceeds,
            }
        })
        .collect();

    let (onset_year, direction) = match first_run(&evidence, config.consecutive_required) {
        Some((year, positive)) => (
            Some(year),
            if positive {
                Direction::Deceleration
            } else {
                Direction::Acceleration
            },
        ),
        None => (None, Direction::None),
    };

    Ok(DivergenceReport {
        onset_year,
        direction,
        anchor_window: *anchor,
        threshold_sigma: config.threshold_sigma,
        consecutive_required: config.consecutive_required,
        anchor_n: anchor_fit.n,
        anchor_a: params.a,
        anchor_k: params.k,
        anchor_rmse: rmse,
        exact_anchor,
        evidence,
    })
}

/// Start year and sign of the first run of `needed` consecutive exceeding
/// residuals sharing one sign.
fn first_run(evidence: &[Evidence], needed: usize) -> Option<(f64, bool)> {
    let mut start = 0usize;
    let mut len = 0usize;
    let mut sign = false;
    for (i, e) in evidence.iter().enumerate() {
        let positive = e.residual > 0.0;
        if !e.exceeds {
            len = 0;
            continue;
        }
        if len > 0 && positive == sign {
            len += 1;
        } else {
            start = i;
            sign = positive;
            len = 1;
        }
        if len >= needed {
            return Some((evidence[start].year, sign));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScanOutcome {
    Report(DivergenceReport),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub anchor_end: f64,
    pub outcome: ScanOutcome,
}

/// Runs the detector once per candidate anchor end, each independently.
/// Candidates whose anchor cannot be fitted are recorded as skipped.
pub fn scan_anchor_end(
    series: &TimeSeries,
    anchor_start: Option<f64>,
    candidate_ends: &[f64],
    config: &DetectorConfig,
) -> Vec<ScanEntry> {
    candidate_ends
        .iter()
        .map(|&end| {
            let outcome = WindowSpec::new(anchor_start, Some(end))
                .map_err(|e| e.to_string())
                .and_then(|anchor| {
                    detect_divergence(series, &anchor, config).map_err(|e| e.to_string())
                });
            ScanEntry {
                anchor_end: end,
                outcome: match outcome {
                    Ok(report) => ScanOutcome::Report(report),
                    Err(reason) => ScanOutcome::Skipped { reason },
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperbolicParams;

    const USSR_FIT: HyperbolicParams = HyperbolicParams {
        a: 6.547e-1,
        k: 3.452e-4,
    };

    fn years() -> Vec<f64> {
        let mut y = vec![1.0, 1000.0, 1500.0, 1600.0, 1700.0];
        y.extend((0..=7).map(|i| 1820.0 + 10.0 * i as f64));
        y
    }

    fn series_with(years: &[f64], factor: impl Fn(f64) -> f64) -> TimeSeries {
        let values = years
            .iter()
            .map(|&t| USSR_FIT.eval(t).unwrap() * factor(t))
            .collect();
        TimeSeries::new("s", "u", years.to_vec(), values).unwrap()
    }

    #[test]
    fn level_drop_after_1870_is_deceleration_at_1880() {
        // Exact through 1870, then 10% below the hyperbola for 1880 and 1890.
        // Reciprocals are 1/0.9 = 1.111 times the line there, so every
        // post-anchor residual is +0.111 (a - k t) > 0.
        let s = series_with(&years(), |t| if t >= 1880.0 { 0.9 } else { 1.0 });
        let r = detect_divergence(
            &s,
            &WindowSpec::between(1.0, 1870.0),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(r.onset_year, Some(1880.0));
        assert_eq!(r.direction, Direction::Deceleration);
        assert!(r.exact_anchor);
        assert_eq!(r.evidence.len(), 2);
        assert!(r.evidence.iter().all(|e| e.residual > 0.0));
    }

    #[test]
    fn pure_hyperbola_has_no_onset() {
        let s = series_with(&years(), |_| 1.0);
        let r = detect_divergence(
            &s,
            &WindowSpec::between(1.0, 1820.0),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(r.onset_year, None);
        assert_eq!(r.direction, Direction::None);
        assert_eq!(r.evidence.len(), 7);
        assert_eq!(r.anchor_n, 6);
    }

    #[test]
    fn level_rise_is_acceleration() {
        let s = series_with(&years(), |t| if t > 1840.0 { 1.1 } else { 1.0 });
        let r = detect_divergence(
            &s,
            &WindowSpec::between(1.0, 1830.0),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(r.onset_year, Some(1850.0));
        assert_eq!(r.direction, Direction::Acceleration);
    }

    #[test]
    fn noisy_anchor_uses_sigma_threshold() {
        // Alternating ±1% around the hyperbola; the post-anchor points sit
        // 30% low, far beyond 2.5 anchor RMSE.
        let ys: Vec<f64> = (0..22).map(|i| 1500.0 + 15.0 * i as f64).collect();
        let s = series_with(&ys, |t| {
            if t > 1770.0 {
                0.7
            } else if ((t - 1500.0) / 15.0) as i64 % 2 == 0 {
                1.01
            } else {
                0.99
            }
        });
        let r = detect_divergence(
            &s,
            &WindowSpec::between(1500.0, 1770.0),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!(!r.exact_anchor);
        assert!(r.evidence.iter().all(|e| e.standardized.is_some()));
        assert_eq!(r.onset_year, Some(1785.0));
        assert_eq!(r.direction, Direction::Deceleration);
    }

    #[test]
    fn alternating_signs_do_not_trigger() {
        let ys: Vec<f64> = (0..12).map(|i| 1500.0 + 30.0 * i as f64).collect();
        let s = series_with(&ys, |t| match t as i64 {
            1740 | 1800 => 0.7,
            1770 | 1830 => 1.3,
            _ => 1.0,
        });
        let r = detect_divergence(
            &s,
            &WindowSpec::between(1500.0, 1710.0),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(r.onset_year, None);
    }

    #[test]
    fn errors() {
        let s = series_with(&years(), |_| 1.0);
        assert!(matches!(
            detect_divergence(
                &s,
                &WindowSpec::between(1.0, 1000.0),
                &DetectorConfig::default()
            ),
            Err(DivergenceError::Fit(FitError::InsufficientData {
                n: 2,
                ..
            }))
        ));
        assert!(matches!(
            detect_divergence(
                &s,
                &WindowSpec::between(1.0, 1900.0),
                &DetectorConfig::default()
            ),
            Err(DivergenceError::NoPostAnchorData { .. })
        ));
        let bad = DetectorConfig {
            threshold_sigma: 2.5,
            consecutive_required: 0,
        };
        assert!(matches!(
            detect_divergence(&s, &WindowSpec::between(1.0, 1820.0), &bad),
            Err(DivergenceError::InvalidConfig(_))
        ));
    }

    #[test]
    fn scan_on_pure_hyperbola() {
        let s = series_with(&years(), |_| 1.0);
        let scan = scan_anchor_end(
            &s,
            Some(1.0),
            &[1700.0, 1820.0, 1870.0],
            &DetectorConfig::default(),
        );
        assert_eq!(scan.len(), 3);
        for entry in &scan {
            match &entry.outcome {
                ScanOutcome::Report(r) => assert_eq!(r.onset_year, None),
                ScanOutcome::Skipped { reason } => panic!("skipped: {reason}"),
            }
        }
    }

    #[test]
    fn scan_skips_thin_anchor_and_matches_single_run() {
        let s = series_with(&years(), |t| if t >= 1850.0 { 0.9 } else { 1.0 });
        let config = DetectorConfig::default();
        let scan = scan_anchor_end(&s, Some(1.0), &[1000.0, 1830.0], &config);
        assert!(matches!(scan[0].outcome, ScanOutcome::Skipped { .. }));
        let single = detect_divergence(&s, &WindowSpec::between(1.0, 1830.0), &config).unwrap();
        assert_eq!(scan[1].outcome, ScanOutcome::Report(single));
    }

    #[test]
    fn onset_non_increasing_as_anchor_shrinks() {
        let ys: Vec<f64> = (0..40).map(|i| 1500.0 + 10.0 * i as f64).collect();
        let s = series_with(&ys, |t| if t >= 1800.0 { 0.9 } else { 1.0 });
        let ends: Vec<f64> = (0..=25).map(|i| 1790.0 - 10.0 * i as f64).collect();
        let scan = scan_anchor_end(&s, None, &ends, &DetectorConfig::default());
        let onsets: Vec<f64> = scan
            .iter()
            .map(|e| match &e.outcome {
                ScanOutcome::Report(r) => r.onset_year.expect("onset"),
                ScanOutcome::Skipped { reason } => panic!("{reason}"),
            })
            .collect();
        // Brute force: the first perturbed year after any clean anchor is 1800.
        assert!(onsets.iter().all(|&y| y == 1800.0));
        assert!(onsets.windows(2).all(|w| w[1] <= w[0]));
    }
}
