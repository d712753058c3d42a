//! Serialized outputs: long CSV, SVG charts with CSV sidecars, and the
//! combined analysis report.
//!
//! Every output is a pure function of its inputs so repeated runs are
//! byte-identical.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::divergence::DivergenceReport;
use crate::fit::FitResult;
use crate::ingest::{slice, TimeSeries, WindowSpec};
use crate::model::HyperbolicParams;
use crate::regimes::RegimeTestResult;

/// Formats `v` with 12 significant digits, trailing zeros removed. Plain
/// decimal notation is used for exponents in `[-5, 15)`.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-5..15).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        } else {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        let _ = write!(out, "e{exp}");
    }
    out
}

/// Long `year,gdp` CSV at 12 significant digits.
pub fn emit_long_csv(series: &TimeSeries) -> String {
    let mut out = String::from("year,gdp\n");
    for (t, v) in series.points() {
        let _ = writeln!(out, "{},{}", format_sig12(t), format_sig12(v));
    }
    out
}

/// `sha256:` followed by the hex digest of `bytes`.
pub fn input_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub label: String,
    pub unit: String,
    pub fit: FitResult,
    pub singularity_year: f64,
    pub divergence: DivergenceReport,
    pub regime_test: RegimeTestResult,
    pub tool_version: String,
    pub input_digest: String,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// GDP on a log10 axis.
    Semilog,
    /// `1/GDP` on a linear axis.
    Reciprocal,
    /// `1/GDP` restricted to a late window.
    ReciprocalTail,
}

impl PlotKind {
    fn reciprocal(&self) -> bool {
        !matches!(self, PlotKind::Semilog)
    }
}

/// Coordinates of one chart in data space. For semilog charts `y` holds GDP
/// values; the log scale is applied only when drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub kind: PlotKind,
    pub title: String,
    pub y_label: String,
    pub data: Vec<(f64, f64)>,
    pub overlay: Vec<(f64, f64)>,
    pub boundaries: Vec<f64>,
}

/// Collects the points to draw: the series inside `window`, the optional
/// fitted hyperbola sampled at each plotted year, and boundary rules that
/// fall inside the plotted year range.
pub fn build_plot(
    series: &TimeSeries,
    kind: PlotKind,
    window: &WindowSpec,
    overlay: Option<&HyperbolicParams>,
    boundaries: &[f64],
) -> Plot {
    let shown = slice(series, window);
    let transform = |v: f64| if kind.reciprocal() { 1.0 / v } else { v };
    let data: Vec<(f64, f64)> = shown.points().map(|(t, v)| (t, transform(v))).collect();
    let overlay = overlay
        .map(|p| {
            shown
                .years()
                .iter()
                .filter_map(|&t| {
                    if kind.reciprocal() {
                        Some((t, p.reciprocal(t)))
                    } else {
                        p.eval(t).ok().map(|v| (t, v))
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    let (lo, hi) = (shown.first_year(), shown.last_year());
    let boundaries = boundaries
        .iter()
        .copied()
        .filter(|&b| matches!((lo, hi), (Some(lo), Some(hi)) if b >= lo && b <= hi))
        .collect();
    let (title, y_label) = match kind {
        PlotKind::Semilog => (
            format!("{}: GDP", series.label()),
            format!("GDP [{}]", series.unit()),
        ),
        PlotKind::Reciprocal => (
            format!("{}: reciprocal GDP", series.label()),
            "1/GDP".to_string(),
        ),
        PlotKind::ReciprocalTail => (
            format!("{}: reciprocal GDP, {} onward", series.label(), window),
            "1/GDP".to_string(),
        ),
    };
    Plot {
        kind,
        title,
        y_label,
        data,
        overlay,
        boundaries,
    }
}

/// CSV listing every plotted coordinate at full precision:
/// `series,year,value` with series one of `data`, `fit`, `boundary`.
pub fn plot_sidecar_csv(plot: &Plot) -> String {
    let mut out = String::from("series,year,value\n");
    for (t, v) in &plot.data {
        let _ = writeln!(out, "data,{t},{v}");
    }
    for (t, v) in &plot.overlay {
        let _ = writeln!(out, "fit,{t},{v}");
    }
    for b in &plot.boundaries {
        let _ = writeln!(out, "boundary,{b},");
    }
    out
}

pub const CANVAS_WIDTH: f64 = 960.0;
pub const CANVAS_HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Tick positions stepping through the 1-2-5 progression, at most about
/// `target` of them across `[lo, hi]`.
pub fn linear_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * magnitude);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

/// Log-axis ticks (values, not logs): every decade, plus the 2 and 5
/// multiples when the range spans fewer than three decades.
pub fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let (dlo, dhi) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    let dense = dhi - dlo < 3;
    let mut ticks = Vec::new();
    for d in dlo..=dhi {
        let base = 10f64.powi(d);
        let mults: &[f64] = if dense { &[1.0, 2.0, 5.0] } else { &[1.0] };
        for m in mults {
            let v = m * base;
            if v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12) {
                ticks.push(v);
            }
        }
    }
    ticks
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Renders a 960×600 SVG. The data series is a polyline with point markers,
/// the fit a dashed polyline, regime boundaries vertical rules.
pub fn render_svg(plot: &Plot) -> String {
    let log_axis = plot.kind == PlotKind::Semilog;
    let to_axis = |v: f64| if log_axis { v.log10() } else { v };

    let xs = plot.data.iter().chain(&plot.overlay).map(|p| p.0);
    let (x_lo, x_hi) = padded_x(extent(xs.chain(plot.boundaries.iter().copied())));
    let ys = plot.data.iter().chain(&plot.overlay).map(|p| to_axis(p.1));
    let (y_lo, y_hi) = match extent(ys) {
        Some((lo, hi)) => padded(lo, hi),
        None => (0.0, 1.0),
    };

    let plot_w = CANVAS_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = CANVAS_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |t: f64| MARGIN_LEFT + (t - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |a: f64| MARGIN_TOP + (y_hi - a) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = CANVAS_WIDTH,
        h = CANVAS_HEIGHT
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        CANVAS_WIDTH, CANVAS_HEIGHT
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        CANVAS_WIDTH / 2.0,
        escape_xml(&plot.title)
    );

    // Axes frame.
    let left = MARGIN_LEFT;
    let (top, bottom) = (MARGIN_TOP, MARGIN_TOP + plot_h);
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );

    svg.push_str("<g class=\"x-ticks\">\n");
    for t in linear_ticks(x_lo, x_hi, 8) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            format_sig12(t)
        );
    }
    svg.push_str("</g>\n<g class=\"y-ticks\">\n");
    let y_ticks: Vec<(f64, f64)> = if log_axis {
        log_ticks(10f64.powf(y_lo), 10f64.powf(y_hi))
            .into_iter()
            .map(|v| (v.log10(), v))
            .collect()
    } else {
        linear_ticks(y_lo, y_hi, 8)
            .into_iter()
            .map(|v| (v, v))
            .collect()
    };
    for (pos, label) in y_ticks {
        let y = py(pos);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            format_sig12(label)
        );
    }
    svg.push_str("</g>\n");

    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Year</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        CANVAS_HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape_xml(&plot.y_label)
    );

    for &b in &plot.boundaries {
        let x = px(b);
        let _ = writeln!(
            svg,
            r##"<line class="regime" x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="#888888" stroke-dasharray="2 3"/>"##
        );
    }

    let polyline = |pts: &[(f64, f64)]| -> String {
        pts.iter()
            .map(|&(t, v)| format!("{:.2},{:.2}", px(t), py(to_axis(v))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if !plot.overlay.is_empty() {
        let _ = writeln!(
            svg,
            r##"<polyline class="fit" points="{}" fill="none" stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            polyline(&plot.overlay)
        );
    }
    if !plot.data.is_empty() {
        let _ = writeln!(
            svg,
            r##"<polyline class="data" points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
            polyline(&plot.data)
        );
        svg.push_str("<g class=\"markers\" fill=\"#1f77b4\">\n");
        for &(t, v) in &plot.data {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
                px(t),
                py(to_axis(v))
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

fn padded_x(range: Option<(f64, f64)>) -> (f64, f64) {
    match range {
        Some((lo, hi)) => padded(lo, hi),
        None => (0.0, 1.0),
    }
}
