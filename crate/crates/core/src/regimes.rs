//! Tests whether hypothesized regime boundaries break the reciprocal line.
//!
//! The null model is one straight line through `1/S` on the whole window;
//! the alternative fits an independent line per segment. The comparison is
//! a nested-model F-test plus AIC, both in reciprocal space, and
//! segmentation counts as supported only when both agree.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

use crate::fit::{self, FitResult, Weighting, EXACT_FIT_RELATIVE, MIN_POINTS};
use crate::ingest::{slice, TimeSeries, WindowSpec};

pub const DEFAULT_BOUNDARIES: [f64; 2] = [1750.0, 1870.0];
pub const DEFAULT_LABELS: [&str; 3] = ["Malthusian", "post-Malthusian", "sustained-growth"];
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("regime boundaries must be strictly increasing: {0:?}")]
    Unordered(Vec<f64>),
    #[error("regime boundaries must be finite: {0:?}")]
    NonFinite(Vec<f64>),
    #[error(
        "{labels} labels given for {boundaries} boundaries; need one more label than boundaries"
    )]
    LabelCount { labels: usize, boundaries: usize },
    #[error("window {0} contains no observations")]
    EmptyWindow(WindowSpec),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    boundaries: Vec<f64>,
    labels: Vec<String>,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            boundaries: DEFAULT_BOUNDARIES.to_vec(),
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RegimeSpec {
    pub fn new(boundaries: Vec<f64>, labels: Vec<String>) -> Result<Self, RegimeError> {
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(RegimeError::NonFinite(boundaries));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RegimeError::Unordered(boundaries));
        }
        if labels.len() != boundaries.len() + 1 {
            return Err(RegimeError::LabelCount {
                labels: labels.len(),
                boundaries: boundaries.len(),
            });
        }
        Ok(Self { boundaries, labels })
    }

    /// Boundaries with generated labels: the standard regime names while
    /// they last, then `segment N`.
    pub fn with_boundaries(boundaries: Vec<f64>) -> Result<Self, RegimeError> {
        let labels = (0..=boundaries.len())
            .map(|i| match DEFAULT_LABELS.get(i) {
                Some(name) if boundaries.len() < DEFAULT_LABELS.len() => name.to_string(),
                _ => format!("segment {}", i + 1),
            })
            .collect();
        Self::new(boundaries, labels)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Segment windows: `(-inf, b1)`, `[b1, b2)`, ..., `[bm, +inf)`. The
    /// returned `WindowSpec`s carry the bounds; the upper bound is exclusive.
    fn segment_bounds(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let mut lows = vec![None];
        lows.extend(self.boundaries.iter().copied().map(Some));
        let mut highs: Vec<Option<f64>> = self.boundaries.iter().copied().map(Some).collect();
        highs.push(None);
        lows.into_iter().zip(highs).collect()
    }

    fn segment_of(&self, t: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSegment {
    pub label: String,
    /// `t_max` is exclusive: the boundary year opens the next segment.
    pub window: WindowSpec,
    pub n: usize,
}

/// Half-open partition of the series' years by its boundaries.
pub fn annotate_regimes(series: &TimeSeries, spec: &RegimeSpec) -> Vec<RegimeSegment> {
    let mut counts = vec![0usize; spec.labels.len()];
    for &t in series.years() {
        counts[spec.segment_of(t)] += 1;
    }
    spec.segment_bounds()
        .into_iter()
        .zip(spec.labels.iter())
        .zip(counts)
        .map(|(((t_min, t_max), label), n)| RegimeSegment {
            label: label.clone(),
            window: WindowSpec { t_min, t_max },
            n,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SegmentationNotSupported,
    SegmentationSupported,
    InsufficientData,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SegmentationNotSupported => "segmentation_not_supported",
            Verdict::SegmentationSupported => "segmentation_supported",
            Verdict::InsufficientData => "insufficient_data",
        }
    }
}

/// Outcome of the single-line versus segmented comparison.
///
/// `f_statistic` is `None` when it is undefined (insufficient data or no
/// boundary inside the window) and also when the segmented fit is exact
/// while the single line is not, i.e. F is unbounded;
/// `segmented_fit_exact` distinguishes the latter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTestResult {
    pub window: WindowSpec,
    pub alpha: f64,
    pub n: usize,
    pub segments: Vec<RegimeSegment>,
    pub single_fit: Option<FitResult>,
    pub segmented_fits: Vec<FitResult>,
    pub sse_single: f64,
    pub sse_segmented: f64,
    pub df_numerator: usize,
    pub df_denominator: usize,
    pub f_statistic: Option<f64>,
    pub f_critical: Option<f64>,
    pub segmented_fit_exact: bool,
    pub aic_single: f64,
    pub aic_segmented: f64,
    pub verdict: Verdict,
}

fn aic(sse: f64, n: usize, params: usize, floor: f64) -> f64 {
    let n_f = n as f64;
    n_f * (sse.max(floor) / n_f).ln() + 2.0 * params as f64
}

/// Sum of squared residuals of a least-squares line through `1/S`; segments
/// of one or two points are fitted exactly.
fn segment_sse(segment: &TimeSeries) -> (f64, Option<FitResult>) {
    if segment.len() < MIN_POINTS {
        return (0.0, None);
    }
    let fit = fit::reciprocal_line_fit(segment, Weighting::Uniform);
    (fit.sse_transformed(), Some(fit))
}

pub fn test_regimes(
    series: &TimeSeries,
    spec: &RegimeSpec,
    window: &WindowSpec,
    alpha: f64,
) -> Result<RegimeTestResult, RegimeError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RegimeError::Alpha(alpha));
    }
    let sliced = slice(series, window);
    if sliced.is_empty() {
        return Err(RegimeError::EmptyWindow(*window));
    }
    let n = sliced.len();

    // Only segments holding window points take part in the comparison.
    let mut parts: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.labels.len()];
    for (t, v) in sliced.points() {
        parts[spec.segment_of(t)].push((t, v));
    }
    let (segments, parts): (Vec<RegimeSegment>, Vec<Vec<(f64, f64)>>) =
        annotate_regimes(&sliced, spec)
            .into_iter()
            .zip(parts)
            .filter(|(seg, _)| seg.n > 0)
            .unzip();
    let m = segments.len();
    let insufficient = n < MIN_POINTS || segments.iter().any(|s| s.n < MIN_POINTS);

    let (sse_single, single_fit) = segment_sse(&sliced);
    let mut sse_segmented = 0.0;
    let mut segmented_fits = Vec::new();
    for (seg, points) in segments.iter().zip(parts) {
        let part = TimeSeries::from_points(sliced.label(), sliced.unit(), points)
            .expect("subset of a valid series");
        debug_assert_eq!(part.len(), seg.n);
        let (sse, fit) = segment_sse(&part);
        sse_segmented += sse;
        segmented_fits.extend(fit);
    }

    let p_single = 2usize;
    let p_segmented = 2 * m;
    let df_numerator = p_segmented - p_single;
    let df_denominator = n.saturating_sub(p_segmented);

    // SSE below this level is round-off on exactly collinear reciprocals.
    let scale = fit::reciprocal_scale(&sliced);
    let floor = n as f64 * (EXACT_FIT_RELATIVE * scale).powi(2);
    let aic_single = aic(sse_single, n, p_single, floor);
    let aic_segmented = aic(sse_segmented, n, p_segmented, floor);

    let mut f_statistic = None;
    let mut f_critical = None;
    let mut segmented_fit_exact = false;
    let verdict = if insufficient {
        Verdict::InsufficientData
    } else if m < 2 || df_denominator == 0 {
        Verdict::SegmentationNotSupported
    } else {
        let crit = FisherSnedecor::new(df_numerator as f64, df_denominator as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(1.0 - alpha);
        f_critical = Some(crit);
        let f_exceeds = if sse_single <= floor {
            f_statistic = Some(0.0);
            false
        } else if sse_segmented <= floor {
            segmented_fit_exact = true;
            true
        } else {
            let f = ((sse_single - sse_segmented).max(0.0) / df_numerator as f64)
                / (sse_segmented / df_denominator as f64);
            f_statistic = Some(f);
            f > crit
        };
        if f_exceeds && aic_segmented < aic_single {
            Verdict::SegmentationSupported
        } else {
            Verdict::SegmentationNotSupported
        }
    };

    Ok(RegimeTestResult {
        window: *window,
        alpha,
        n,
        segments,
        single_fit,
        segmented_fits,
        sse_single,
        sse_segmented,
        df_numerator,
        df_denominator,
        f_statistic,
        f_critical,
        segmented_fit_exact,
        aic_single,
        aic_segmented,
        verdict,
    })
}
