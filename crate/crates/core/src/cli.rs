//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input could not be read or parsed, 3 the data
//! does not support the requested fit, 4 usage error, 5 output could not be
//! written.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::divergence::{detect_divergence, DetectorConfig, DivergenceError, DivergenceReport};
use crate::fit::{fit_hyperbolic, goodness_report, FitError, Weighting};
use crate::ingest::{parse_long_csv, parse_wide_csv, slice, IngestError, TimeSeries, WindowSpec};
use crate::regimes::{self, test_regimes, RegimeError, RegimeSpec, RegimeTestResult};
use crate::report::{
    build_plot, input_digest, plot_sidecar_csv, render_svg, AnalysisReport, PlotKind, TOOL_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_OUTPUT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "hypergrowth",
    version,
    about = "Fit hyperbolic growth to long-run GDP series, detect divergence, test regime boundaries",
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Long,
    Wide,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    ValueSquared,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::ValueSquared => Weighting::ValueSquared,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Semilog,
    Reciprocal,
    ReciprocalTail,
}

impl From<KindArg> for PlotKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Semilog => PlotKind::Semilog,
            KindArg::Reciprocal => PlotKind::Reciprocal,
            KindArg::ReciprocalTail => PlotKind::ReciprocalTail,
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV file to read.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "long")]
    format: Format,
    /// Row label (wide format, required) or series name (long format).
    #[arg(long, value_name = "LABEL")]
    series: Option<String>,
    /// First year of the analysis window (inclusive).
    #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
    from: Option<f64>,
    /// Last year of the analysis window (inclusive).
    #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
    to: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a hyperbola through the reciprocal values.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "uniform")]
        weighting: WeightingArg,
    },
    /// Detect where the series leaves the hyperbola fitted on an anchor window.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
        anchor_from: Option<f64>,
        #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
        anchor_to: f64,
        #[arg(long, default_value_t = 2.5)]
        threshold_sigma: f64,
        #[arg(long, default_value_t = 2)]
        consecutive: usize,
    },
    /// Test whether regime boundaries break the reciprocal line.
    Regimes {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated, strictly increasing boundary years.
        #[arg(long, default_value = "1750,1870", allow_hyphen_values = true)]
        boundaries: String,
        #[arg(long, default_value_t = regimes::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Write an SVG chart and a CSV sidecar of its coordinates.
    Plot {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Overlay the fitted hyperbola.
        #[arg(long)]
        overlay_fit: bool,
        /// Fit window start for the overlay (defaults to --from).
        #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
        fit_from: Option<f64>,
        /// Fit window end for the overlay (defaults to --to).
        #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
        fit_to: Option<f64>,
        /// Draw vertical rules at the regime boundaries.
        #[arg(long)]
        overlay_regimes: bool,
        #[arg(long, default_value = "1750,1870", allow_hyphen_values = true)]
        boundaries: String,
        /// SVG output path; the sidecar is written next to it with a .csv extension.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Fit, divergence and regime test in one report.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "YEAR", allow_negative_numbers = true)]
        anchor_to: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        weighting: WeightingArg,
        #[arg(long, default_value_t = 2.5)]
        threshold_sigma: f64,
        #[arg(long, default_value_t = 2)]
        consecutive: usize,
        #[arg(long, default_value = "1750", allow_hyphen_values = true)]
        boundaries: String,
        #[arg(long, default_value_t = regimes::DEFAULT_ALPHA)]
        alpha: f64,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::new(EXIT_FIT, e.to_string())
    }
}

impl From<DivergenceError> for CliError {
    fn from(e: DivergenceError) -> Self {
        let code = match e {
            DivergenceError::InvalidConfig(_) => EXIT_USAGE,
            _ => EXIT_FIT,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<RegimeError> for CliError {
    fn from(e: RegimeError) -> Self {
        let code = match e {
            RegimeError::EmptyWindow(_) => EXIT_FIT,
            _ => EXIT_USAGE,
        };
        CliError::new(code, e.to_string())
    }
}

struct Loaded {
    series: TimeSeries,
    window: WindowSpec,
    digest: String,
}

fn load(args: &InputArgs) -> Result<Loaded, CliError> {
    let window = WindowSpec::new(args.from, args.to)
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    if matches!(args.format, Format::Wide) && args.series.is_none() {
        return Err(CliError::new(
            EXIT_USAGE,
            "--series is required with --format wide",
        ));
    }
    let bytes = std::fs::read(&args.input).map_err(|e| {
        CliError::new(
            EXIT_PARSE,
            format!("cannot read {}: {e}", args.input.display()),
        )
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        CliError::new(
            EXIT_PARSE,
            format!("{}: not valid UTF-8: {e}", args.input.display()),
        )
    })?;
    let parse_err =
        |e: IngestError| CliError::new(EXIT_PARSE, format!("{}: {e}", args.input.display()));
    let series = match args.format {
        Format::Long => {
            let label = args.series.clone().unwrap_or_else(|| {
                args.input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            parse_long_csv(text).map_err(parse_err)?.with_label(label)
        }
        Format::Wide => {
            parse_wide_csv(text, args.series.as_deref().unwrap_or_default()).map_err(parse_err)?
        }
    };
    Ok(Loaded {
        series,
        window,
        digest: input_digest(&bytes),
    })
}

fn parse_boundaries(raw: &str) -> Result<RegimeSpec, CliError> {
    let years = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::new(EXIT_USAGE, format!("malformed boundary year `{s}`")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if years.is_empty() {
        return Err(CliError::new(
            EXIT_USAGE,
            "--boundaries needs at least one year",
        ));
    }
    Ok(RegimeSpec::with_boundaries(years)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct FitOutput<'a> {
    label: &'a str,
    unit: &'a str,
    input_digest: &'a str,
    window: WindowSpec,
    fitted_window: WindowSpec,
    weighting: Weighting,
    n: usize,
    a: f64,
    k: f64,
    singularity_year: f64,
    rmse: f64,
    r_squared: f64,
    sse_raw: Option<f64>,
    max_abs_standardized_residual: f64,
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    label: &'a str,
    input_digest: &'a str,
    #[serde(flatten)]
    report: &'a DivergenceReport,
}

#[derive(Serialize)]
struct RegimesOutput<'a> {
    label: &'a str,
    input_digest: &'a str,
    boundaries: &'a [f64],
    labels: &'a [String],
    #[serde(flatten)]
    result: &'a RegimeTestResult,
}

#[derive(Serialize)]
struct PlotOutput<'a> {
    kind: PlotKind,
    svg: String,
    csv: String,
    data_points: usize,
    fit_points: usize,
    input_digest: &'a str,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Fit { input, weighting } => {
            let loaded = load(&input)?;
            let weighting = Weighting::from(weighting);
            let fit = fit_hyperbolic(&loaded.series, &loaded.window, weighting)?;
            let params = *fit.hyperbolic().expect("hyperbolic");
            let goodness = goodness_report(&fit, &loaded.series)?;
            Ok(to_json(&FitOutput {
                label: loaded.series.label(),
                unit: loaded.series.unit(),
                input_digest: &loaded.digest,
                window: loaded.window,
                fitted_window: fit.window,
                weighting,
                n: fit.n,
                a: params.a,
                k: params.k,
                singularity_year: params.a / params.k,
                rmse: fit.rmse_transformed,
                r_squared: fit.r_squared_transformed,
                sse_raw: fit.sse_raw,
                max_abs_standardized_residual: goodness.max_abs_standardized,
            }))
        }
        Command::Detect {
            input,
            anchor_from,
            anchor_to,
            threshold_sigma,
            consecutive,
        } => {
            let loaded = load(&input)?;
            let anchor = WindowSpec::new(anchor_from, Some(anchor_to))
                .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
            let config = DetectorConfig {
                threshold_sigma,
                consecutive_required: consecutive,
            };
            let series = slice(&loaded.series, &loaded.window);
            let report = detect_divergence(&series, &anchor, &config)?;
            Ok(to_json(&DetectOutput {
                label: series.label(),
                input_digest: &loaded.digest,
                report: &report,
            }))
        }
        Command::Regimes {
            input,
            boundaries,
            alpha,
        } => {
            let spec = parse_boundaries(&boundaries)?;
            let loaded = load(&input)?;
            let result = test_regimes(&loaded.series, &spec, &loaded.window, alpha)?;
            Ok(to_json(&RegimesOutput {
                label: loaded.series.label(),
                input_digest: &loaded.digest,
                boundaries: spec.boundaries(),
                labels: spec.labels(),
                result: &result,
            }))
        }
        Command::Plot {
            input,
            kind,
            overlay_fit,
            fit_from,
            fit_to,
            overlay_regimes,
            boundaries,
            out,
        } => {
            let kind = PlotKind::from(kind);
            if kind == PlotKind::ReciprocalTail && input.from.is_none() {
                return Err(CliError::new(
                    EXIT_USAGE,
                    "--kind reciprocal-tail requires --from",
                ));
            }
            let spec = parse_boundaries(&boundaries)?;
            let loaded = load(&input)?;
            let params = if overlay_fit {
                let fit_window = WindowSpec::new(
                    fit_from.or(loaded.window.t_min),
                    fit_to.or(loaded.window.t_max),
                )
                .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
                let fit = fit_hyperbolic(&loaded.series, &fit_window, Weighting::Uniform)?;
                Some(*fit.hyperbolic().expect("hyperbolic"))
            } else {
                None
            };
            let rules: &[f64] = if overlay_regimes {
                spec.boundaries()
            } else {
                &[]
            };
            let plot = build_plot(&loaded.series, kind, &loaded.window, params.as_ref(), rules);
            let csv_path = sidecar_path(&out);
            let write = |path: &Path, contents: &str| {
                std::fs::write(path, contents).map_err(|e| {
                    CliError::new(EXIT_OUTPUT, format!("cannot write {}: {e}", path.display()))
                })
            };
            write(&out, &render_svg(&plot))?;
            write(&csv_path, &plot_sidecar_csv(&plot))?;
            Ok(to_json(&PlotOutput {
                kind,
                svg: out.display().to_string(),
                csv: csv_path.display().to_string(),
                data_points: plot.data.len(),
                fit_points: plot.overlay.len(),
                input_digest: &loaded.digest,
            }))
        }
        Command::Analyze {
            input,
            anchor_to,
            weighting,
            threshold_sigma,
            consecutive,
            boundaries,
            alpha,
        } => {
            let spec = parse_boundaries(&boundaries)?;
            let loaded = load(&input)?;
            let anchor = WindowSpec::new(loaded.window.t_min, Some(anchor_to))
                .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
            let fit = fit_hyperbolic(&loaded.series, &anchor, weighting.into())?;
            let params = *fit.hyperbolic().expect("hyperbolic");
            let config = DetectorConfig {
                threshold_sigma,
                consecutive_required: consecutive,
            };
            let series = slice(&loaded.series, &loaded.window);
            let divergence = detect_divergence(&series, &anchor, &config)?;
            let regime_test = test_regimes(&series, &spec, &anchor, alpha)?;
            Ok(to_json(&AnalysisReport {
                label: series.label().to_string(),
                unit: series.unit().to_string(),
                singularity_year: params.a / params.k,
                fit,
                divergence,
                regime_test,
                tool_version: TOOL_VERSION.to_string(),
                input_digest: loaded.digest,
            }))
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
