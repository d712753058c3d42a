//! Hyperbolic growth analysis for long-run economic time series.
//!
//! A hyperbola `S(t) = 1/(a - k t)` becomes a straight line in reciprocal
//! space, so it is fitted by least squares through `1/S`. On top of the fit
//! the crate detects where a series departs from its hyperbolic trajectory
//! and tests hypothesized regime boundaries against the single-line null.
//!
//! ```
//! use hypergrowth::ingest::{parse_long_csv, WindowSpec};
//! use hypergrowth::fit::{fit_hyperbolic, Weighting};
//!
//! let series = parse_long_csv("year,gdp\n0,2\n1,2.5\n2,3.3333333333333335\n").unwrap();
//! let fit = fit_hyperbolic(&series, &WindowSpec::unbounded(), Weighting::Uniform).unwrap();
//! let p = fit.hyperbolic().unwrap();
//! assert!((p.a - 0.5).abs() < 1e-12 && (p.k - 0.1).abs() < 1e-12);
//! ```

pub mod cli;
pub mod divergence;
pub mod fit;
pub mod ingest;
pub mod model;
pub mod regimes;
pub mod report;

pub use divergence::{
    detect_divergence, scan_anchor_end, DetectorConfig, Direction, DivergenceReport,
};
pub use fit::{fit_exponential, fit_hyperbolic, goodness_report, FitResult, Weighting};
pub use ingest::{parse_long_csv, parse_wide_csv, slice, TimeSeries, WindowSpec};
pub use model::{
    eval_exponential, eval_hyperbolic, reciprocal_line, reciprocal_series, singularity_time,
    ExponentialParams, HyperbolicParams,
};
pub use regimes::{annotate_regimes, test_regimes, RegimeSpec, RegimeTestResult, Verdict};
pub use report::emit_long_csv;
