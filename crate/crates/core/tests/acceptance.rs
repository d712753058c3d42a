//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 1 to 4 need the Maddison GDP series, which is not bundled. Point
//! the suite at a CSV export with either
//!
//! ```text
//! cargo test --test acceptance -- --maddison PATH [--format wide] [--series LABEL]
//! HYPERGROWTH_MADDISON_CSV=PATH cargo test --test acceptance
//! ```
//!
//! `HYPERGROWTH_MADDISON_FORMAT` and `HYPERGROWTH_MADDISON_SERIES` mirror the
//! flags. The wide-format row label defaults to `Total Former USSR`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hypergrowth::divergence::{detect_divergence, DetectorConfig, Direction};
use hypergrowth::fit::{fit_hyperbolic, Weighting};
use hypergrowth::ingest::{parse_long_csv, TimeSeries, WindowSpec};
use hypergrowth::model::{reciprocal_series, HyperbolicParams};
use hypergrowth::report::emit_long_csv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

const SEED: u64 = 0x4879_7065_7247_726f;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct MaddisonSource {
    path: PathBuf,
    format: String,
    series: String,
}

impl MaddisonSource {
    fn from_args_and_env() -> Option<Self> {
        let args: Vec<String> = std::env::args().skip(1).collect();
        let flag = |name: &str| {
            args.iter()
                .position(|a| a == name)
                .and_then(|i| args.get(i + 1).cloned())
        };
        let env = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let path = flag("--maddison").or_else(|| env("HYPERGROWTH_MADDISON_CSV"))?;
        Some(Self {
            path: PathBuf::from(path),
            format: flag("--format")
                .or_else(|| env("HYPERGROWTH_MADDISON_FORMAT"))
                .unwrap_or_else(|| "long".into()),
            series: flag("--series")
                .or_else(|| env("HYPERGROWTH_MADDISON_SERIES"))
                .unwrap_or_else(|| "Total Former USSR".into()),
        })
    }

    fn input_args(&self) -> Vec<String> {
        let mut args = vec![
            "--input".to_string(),
            self.path.display().to_string(),
            "--format".to_string(),
            self.format.clone(),
        ];
        if self.format == "wide" {
            args.push("--series".into());
            args.push(self.series.clone());
        }
        args
    }
}

struct CliRun {
    code: Option<i32>,
    stdout: Vec<u8>,
    stderr: String,
}

fn cli(args: &[String]) -> CliRun {
    let out = Command::new(env!("CARGO_BIN_EXE_hypergrowth"))
        .args(args)
        .output()
        .expect("binary runs");
    CliRun {
        code: out.status.code(),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn cli_json(args: &[String]) -> Result<Value, String> {
    let run = cli(args);
    if run.code != Some(0) {
        return Err(format!("exit {:?}: {}", run.code, run.stderr.trim_end()));
    }
    serde_json::from_slice(&run.stdout).map_err(|e| format!("stdout is not JSON: {e}"))
}

fn strings(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn within_time(outcome: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    match outcome {
        Outcome::Pass(msg) if elapsed > limit => {
            Outcome::Fail(format!("{msg}; took {:.2?}, limit {:.0?}", elapsed, limit))
        }
        Outcome::Pass(msg) => Outcome::Pass(format!("{msg} ({elapsed:.2?})")),
        other => other,
    }
}

fn rel(x: f64, target: f64) -> f64 {
    ((x - target) / target).abs()
}

fn maddison_fit(src: &MaddisonSource) -> Result<Value, String> {
    let mut args = strings(&["fit"]);
    args.extend(src.input_args());
    args.extend(strings(&[
        "--from",
        "1",
        "--to",
        "1870",
        "--weighting",
        "uniform",
    ]));
    cli_json(&args)
}

fn criterion_1(src: Option<&MaddisonSource>) -> Outcome {
    let Some(src) = src else {
        return Outcome::Skip("Maddison CSV not provided".into());
    };
    let start = Instant::now();
    let outcome = match maddison_fit(src) {
        Err(e) => Outcome::Fail(e),
        Ok(json) => {
            let a = json["a"].as_f64().unwrap_or(f64::NAN);
            let k = json["k"].as_f64().unwrap_or(f64::NAN);
            let msg = format!(
                "a = {a:.4e} ({:+.2}%), k = {k:.4e} ({:+.2}%)",
                100.0 * (a / 6.547e-1 - 1.0),
                100.0 * (k / 3.452e-4 - 1.0)
            );
            if rel(a, 6.547e-1) <= 0.05 && rel(k, 3.452e-4) <= 0.05 {
                Outcome::Pass(msg)
            } else {
                Outcome::Fail(msg)
            }
        }
    };
    within_time(outcome, start.elapsed(), Duration::from_secs(1))
}

fn criterion_2(src: Option<&MaddisonSource>) -> Outcome {
    let Some(src) = src else {
        return Outcome::Skip("Maddison CSV not provided".into());
    };
    match maddison_fit(src) {
        Err(e) => Outcome::Fail(e),
        Ok(json) => {
            let a = json["a"].as_f64().unwrap_or(f64::NAN);
            let k = json["k"].as_f64().unwrap_or(f64::NAN);
            let ts = HyperbolicParams::new(a, k)
                .singularity_time()
                .unwrap_or(f64::NAN);
            let msg = format!("singularity year {ts:.1}");
            if (1890.0..=1903.0).contains(&ts) {
                Outcome::Pass(msg)
            } else {
                Outcome::Fail(msg)
            }
        }
    }
}

fn criterion_3(src: Option<&MaddisonSource>) -> Outcome {
    let Some(src) = src else {
        return Outcome::Skip("Maddison CSV not provided".into());
    };
    let start = Instant::now();
    let mut args = strings(&["detect"]);
    args.extend(src.input_args());
    args.extend(strings(&["--anchor-from", "1", "--anchor-to", "1870"]));
    let outcome = match cli_json(&args) {
        Err(e) => Outcome::Fail(e),
        Ok(json) => {
            let onset = json["onset_year"].as_f64();
            let direction = json["direction"].as_str().unwrap_or("?").to_string();
            let z: Vec<String> = json["evidence"]
                .as_array()
                .map(|ev| {
                    ev.iter()
                        .map(|e| match (e["year"].as_f64(), e["standardized"].as_f64()) {
                            (Some(y), Some(z)) => format!("{y}:{z:+.2}"),
                            (Some(y), None) => format!("{y}:exact"),
                            _ => "?".into(),
                        })
                        .collect()
                })
                .unwrap_or_default();
            let msg = format!(
                "onset {onset:?}, direction {direction}, standardized residuals [{}]",
                z.join(", ")
            );
            let onset_ok = onset.is_some_and(|t| (1870.0..=1914.0).contains(&t));
            if onset_ok && direction == "deceleration" {
                Outcome::Pass(msg)
            } else {
                Outcome::Fail(msg)
            }
        }
    };
    within_time(outcome, start.elapsed(), Duration::from_secs(1))
}

fn criterion_4(src: Option<&MaddisonSource>) -> Outcome {
    let Some(src) = src else {
        return Outcome::Skip("Maddison CSV not provided".into());
    };
    let start = Instant::now();
    let mut args = strings(&["regimes"]);
    args.extend(src.input_args());
    args.extend(strings(&[
        "--boundaries",
        "1750",
        "--to",
        "1870",
        "--alpha",
        "0.01",
    ]));
    let outcome = match cli_json(&args) {
        Err(e) => Outcome::Fail(e),
        Ok(json) => {
            let verdict = json["verdict"].as_str().unwrap_or("?").to_string();
            let counts: Vec<String> = json["segments"]
                .as_array()
                .map(|s| {
                    s.iter()
                        .map(|seg| format!("{}={}", seg["label"], seg["n"]))
                        .collect()
                })
                .unwrap_or_default();
            let msg = format!(
                "verdict {verdict}, F = {}, F_crit = {}, segments [{}]",
                json["f_statistic"],
                json["f_critical"],
                counts.join(", ")
            );
            if verdict == "segmentation_not_supported" {
                Outcome::Pass(msg)
            } else {
                Outcome::Fail(msg)
            }
        }
    };
    within_time(outcome, start.elapsed(), Duration::from_secs(1))
}

/// Random hyperbola with its singularity in [1500, 3000] and a grid of
/// 3 to 40 distinct integer years between 2000 and 20 years before it.
fn random_instance(rng: &mut ChaCha8Rng) -> (HyperbolicParams, Vec<f64>) {
    let a = rng.gen_range(0.1..2.0);
    let ts: f64 = rng.gen_range(1500.0..3000.0);
    let params = HyperbolicParams::new(a, a / ts);
    let n = rng.gen_range(3..=40);
    let mut years: Vec<f64> = Vec::new();
    while years.len() < n {
        let t = rng.gen_range(ts - 2000.0..ts - 20.0).floor();
        if !years.contains(&t) {
            years.push(t);
        }
    }
    years.sort_by(f64::total_cmp);
    (params, years)
}

fn criterion_5() -> Outcome {
    const INSTANCES: usize = 1000;
    const FIT_TOL: f64 = 1e-10;
    const PROPERTY_TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures: Vec<String> = Vec::new();
    let mut worst_fit = 0.0f64;
    let mut worst_property = 0.0f64;

    for i in 0..INSTANCES {
        let (p, years) = random_instance(&mut rng);
        let values: Vec<f64> = years.iter().map(|&t| p.eval(t).unwrap()).collect();
        let series = TimeSeries::new("synthetic", "u", years.clone(), values.clone()).unwrap();

        match fit_hyperbolic(&series, &WindowSpec::unbounded(), Weighting::Uniform) {
            Ok(fit) => {
                let q = fit.hyperbolic().unwrap();
                let err = rel(q.a, p.a).max(rel(q.k, p.k));
                worst_fit = worst_fit.max(err);
                if err > FIT_TOL {
                    failures.push(format!("instance {i}: fit error {err:.2e}"));
                }
            }
            Err(e) => failures.push(format!("instance {i}: fit failed: {e}")),
        }

        let delta = rng.gen_range(-500.0..500.0);
        let c = 10f64.powf(rng.gen_range(-3.0..3.0));
        let shifted = HyperbolicParams::new(p.a - p.k * delta, p.k);
        let scaled = HyperbolicParams::new(p.a / c, p.k / c);
        for (&t, &s) in years.iter().zip(&values) {
            let identity = (p.reciprocal(t) * s - 1.0).abs();
            let shift = rel(shifted.eval(t - delta).unwrap(), s);
            let scale = rel(scaled.eval(t).unwrap(), c * s);
            let worst = identity.max(shift).max(scale);
            worst_property = worst_property.max(worst);
            if worst > PROPERTY_TOL {
                failures.push(format!(
                    "instance {i}, t = {t}: identity {identity:.2e}, shift {shift:.2e}, scale {scale:.2e}"
                ));
            }
        }
        let back = reciprocal_series(&reciprocal_series(&series));
        for (x, y) in values.iter().zip(back.values()) {
            let err = rel(*y, *x);
            worst_property = worst_property.max(err);
            if err > PROPERTY_TOL {
                failures.push(format!("instance {i}: involution error {err:.2e}"));
            }
        }
        if back.unit() != series.unit() {
            failures.push(format!("instance {i}: involution changed the unit"));
        }
    }

    let msg = format!(
        "{INSTANCES} instances, worst fit error {worst_fit:.2e} (tol {FIT_TOL:e}), \
         worst property error {worst_property:.2e} (tol {PROPERTY_TOL:e})"
    );
    let outcome = if failures.is_empty() {
        Outcome::Pass(msg)
    } else {
        let shown: Vec<&str> = failures.iter().take(3).map(String::as_str).collect();
        Outcome::Fail(format!(
            "{msg}; {} violations, first: {}",
            failures.len(),
            shown.join("; ")
        ))
    };
    within_time(outcome, start.elapsed(), Duration::from_secs(10))
}

/// Hyperbola sampled every 25 years over an anchor span of 500 years ending
/// 500 years before the singularity, followed by five post-anchor points
/// every 20 years. Values carry 1% multiplicative Gaussian noise, and the
/// post-anchor values are scaled by `level`.
fn detector_instance(rng: &mut ChaCha8Rng, level: f64) -> (TimeSeries, WindowSpec) {
    let noise = Normal::new(0.0, 0.01).unwrap();
    let a = rng.gen_range(0.3..1.5);
    let ts = rng.gen_range(1800.0f64..2100.0).round();
    let p = HyperbolicParams::new(a, a / ts);
    let anchor_start = ts - 1000.0;
    let anchor_end = ts - 500.0;
    let mut points = Vec::new();
    let mut t = anchor_start;
    while t <= anchor_end {
        points.push((t, p.eval(t).unwrap() * (1.0 + noise.sample(rng))));
        t += 25.0;
    }
    for j in 1..=5 {
        let t = anchor_end + 20.0 * j as f64;
        points.push((t, level * p.eval(t).unwrap() * (1.0 + noise.sample(rng))));
    }
    let series = TimeSeries::from_points("synthetic", "u", points).unwrap();
    (series, WindowSpec::between(anchor_start, anchor_end))
}

fn criterion_6() -> Outcome {
    const TRIALS: usize = 200;
    const REQUIRED: f64 = 0.95;
    let start = Instant::now();
    let config = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);

    let mut null_quiet = 0usize;
    for _ in 0..TRIALS {
        let (series, anchor) = detector_instance(&mut rng, 1.0);
        if let Ok(r) = detect_divergence(&series, &anchor, &config) {
            if r.onset_year.is_none() {
                null_quiet += 1;
            }
        }
    }

    // Half the break trials lower the level (slower growth), half raise it.
    let mut detected = 0usize;
    for i in 0..TRIALS {
        let (level, expected) = if i % 2 == 0 {
            (0.9, Direction::Deceleration)
        } else {
            (1.1, Direction::Acceleration)
        };
        let (series, anchor) = detector_instance(&mut rng, level);
        if let Ok(r) = detect_divergence(&series, &anchor, &config) {
            if r.onset_year.is_some() && r.direction == expected {
                detected += 1;
            }
        }
    }

    let null_rate = null_quiet as f64 / TRIALS as f64;
    let power = detected as f64 / TRIALS as f64;
    let msg = format!(
        "null: no onset in {null_quiet}/{TRIALS} ({:.1}%), break: correct onset in {detected}/{TRIALS} ({:.1}%)",
        100.0 * null_rate,
        100.0 * power
    );
    let outcome = if null_rate >= REQUIRED && power >= REQUIRED {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    };
    within_time(outcome, start.elapsed(), Duration::from_secs(30))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

/// Stdout plus the bytes of every listed output file.
fn capture(args: &[String], outputs: &[PathBuf]) -> Result<Vec<Vec<u8>>, String> {
    for p in outputs {
        let _ = std::fs::remove_file(p);
    }
    let run = cli(args);
    if run.code != Some(0) {
        return Err(format!(
            "{args:?}: exit {:?}: {}",
            run.code,
            run.stderr.trim_end()
        ));
    }
    let mut captured = vec![run.stdout];
    for p in outputs {
        captured.push(std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    Ok(captured)
}

fn criterion_7() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("tempdir: {e}")),
    };
    let hyper = fixture("hyperbola.csv");
    let decel = fixture("decelerating.csv");
    let broken = fixture("broken_slope.csv");
    let wide = fixture("wide.csv");
    let svg = dir.path().join("plot.svg");
    let sidecar = dir.path().join("plot.csv");
    let svg_s = svg.display().to_string();

    let mut cases: Vec<(Vec<String>, Vec<PathBuf>)> = vec![
        (
            strings(&["fit", "--input", &hyper, "--from", "1", "--to", "1870"]),
            vec![],
        ),
        (
            strings(&[
                "fit",
                "--input",
                &wide,
                "--format",
                "wide",
                "--series",
                "Synthetic hyperbola",
                "--weighting",
                "value-squared",
            ]),
            vec![],
        ),
        (
            strings(&[
                "detect",
                "--input",
                &decel,
                "--anchor-from",
                "1",
                "--anchor-to",
                "1870",
            ]),
            vec![],
        ),
        (
            strings(&["regimes", "--input", &broken, "--boundaries", "1750"]),
            vec![],
        ),
        (
            strings(&["regimes", "--input", &hyper, "--to", "1870"]),
            vec![],
        ),
        (
            strings(&["analyze", "--input", &decel, "--anchor-to", "1870"]),
            vec![],
        ),
    ];
    for kind in ["semilog", "reciprocal", "reciprocal-tail"] {
        cases.push((
            strings(&[
                "plot",
                "--input",
                &hyper,
                "--kind",
                kind,
                "--from",
                "1800",
                "--overlay-fit",
                "--overlay-regimes",
                "--out",
                &svg_s,
            ]),
            vec![svg.clone(), sidecar.clone()],
        ));
    }

    let mut problems = Vec::new();
    for (args, outputs) in &cases {
        match (capture(args, outputs), capture(args, outputs)) {
            (Ok(first), Ok(second)) => {
                if first != second {
                    problems.push(format!("{} output differs between runs", args[0]));
                }
            }
            (Err(e), _) | (_, Err(e)) => problems.push(e),
        }
    }

    let mut worst_roundtrip = 0.0f64;
    for name in ["hyperbola.csv", "decelerating.csv", "broken_slope.csv"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let original = parse_long_csv(&text).unwrap();
        let emitted = emit_long_csv(&original);
        let reparsed = parse_long_csv(&emitted).unwrap();
        if reparsed.years() != original.years() {
            problems.push(format!("{name}: years changed in round-trip"));
        }
        for (x, y) in original.values().iter().zip(reparsed.values()) {
            worst_roundtrip = worst_roundtrip.max(rel(*y, *x));
        }
        if emit_long_csv(&reparsed) != emitted {
            problems.push(format!("{name}: second emission differs"));
        }
    }
    if worst_roundtrip > 5e-12 {
        problems.push(format!("round-trip error {worst_roundtrip:.2e}"));
    }

    let msg = format!(
        "{} command runs repeated byte-identically; long-CSV round-trip worst error {worst_roundtrip:.1e}",
        cases.len()
    );
    if problems.is_empty() {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(problems.join("; "))
    }
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let maddison = MaddisonSource::from_args_and_env();
    let src = maddison.as_ref();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 parameter reproduction", Box::new(|| criterion_1(src))),
        ("2 singularity year", Box::new(|| criterion_2(src))),
        ("3 divergence finding", Box::new(|| criterion_3(src))),
        ("4 regime refutation", Box::new(|| criterion_4(src))),
        ("5 exact-recovery properties", Box::new(criterion_5)),
        ("6 detector null/power", Box::new(criterion_6)),
        ("7 determinism and round-trip", Box::new(criterion_7)),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Outcome::Pass(msg) => println!("PASS  criterion {name}: {msg}"),
            Outcome::Fail(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg}");
            }
            Outcome::Skip(msg) => println!("SKIP  criterion {name}: {msg}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
