//! Long-run economic time series and the two CSV layouts they are read from.
//!
//! The long layout is one `year,gdp` record per line. The wide layout follows
//! the Maddison spreadsheet export: the first row holds the years, the first
//! column holds region labels, and empty cells are missing observations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit attached to series read from Maddison-style files.
pub const DEFAULT_UNIT: &str = "billions of 1990 International Geary-Khamis dollars";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: expected header `year,gdp`, found `{found}`")]
    Header { line: u64, found: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {field} is not a number: `{value}`")]
    NonNumeric {
        line: u64,
        field: String,
        value: String,
    },
    #[error("line {line}: value must be positive and finite, found {value}")]
    NonPositive { line: u64, value: f64 },
    #[error("duplicate year {year}")]
    DuplicateYear { year: f64 },
    #[error("series `{label}` not found; available labels: {}", available.join(", "))]
    LabelNotFound {
        label: String,
        available: Vec<String>,
    },
    #[error("series label `{label}` is ambiguous: it appears on {count} rows")]
    AmbiguousLabel { label: String, count: usize },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("invalid time series: {0}")]
    Invalid(String),
    #[error("invalid window: t_min {t_min} is after t_max {t_max}")]
    InvalidWindow { t_min: f64, t_max: f64 },
}

impl From<csv::Error> for IngestError {
    fn from(err: csv::Error) -> Self {
        IngestError::Csv(err.to_string())
    }
}

/// Ordered `(year, value)` observations of one positive quantity.
///
/// Years are strictly increasing and every value is finite and strictly
/// positive. An empty series is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    label: String,
    unit: String,
    years: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from points already sorted by year.
    pub fn new(
        label: impl Into<String>,
        unit: impl Into<String>,
        years: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, IngestError> {
        if years.len() != values.len() {
            return Err(IngestError::Invalid(format!(
                "{} years but {} values",
                years.len(),
                values.len()
            )));
        }
        if let Some(t) = years.iter().find(|t| !t.is_finite()) {
            return Err(IngestError::Invalid(format!("non-finite year {t}")));
        }
        for pair in years.windows(2) {
            if pair[1] == pair[0] {
                return Err(IngestError::DuplicateYear { year: pair[0] });
            }
            if pair[1] < pair[0] {
                return Err(IngestError::Invalid(format!(
                    "years not increasing: {} follows {}",
                    pair[1], pair[0]
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(IngestError::Invalid(format!(
                "value {v} is not positive and finite"
            )));
        }
        Ok(Self {
            label: label.into(),
            unit: unit.into(),
            years,
            values,
        })
    }

    /// Builds a series from `(year, value)` pairs in any order.
    pub fn from_points(
        label: impl Into<String>,
        unit: impl Into<String>,
        mut points: Vec<(f64, f64)>,
    ) -> Result<Self, IngestError> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (years, values) = points.into_iter().unzip();
        Self::new(label, unit, years, values)
    }

    pub fn empty(label: impl Into<String>, unit: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            unit: unit.into(),
            years: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn years(&self) -> &[f64] {
        &self.years
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.years.iter().copied().zip(self.values.iter().copied())
    }

    pub fn first_year(&self) -> Option<f64> {
        self.years.first().copied()
    }

    pub fn last_year(&self) -> Option<f64> {
        self.years.last().copied()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Applies `f` to every value, keeping years, label and unit.
    ///
    /// Fails if `f` produces a value outside the positive finite range.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self, IngestError> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(
            self.label.clone(),
            self.unit.clone(),
            self.years.clone(),
            values,
        )
    }

    pub(crate) fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }
}

/// Closed year interval; either end may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

impl WindowSpec {
    pub fn new(t_min: Option<f64>, t_max: Option<f64>) -> Result<Self, IngestError> {
        if let (Some(lo), Some(hi)) = (t_min, t_max) {
            if lo > hi {
                return Err(IngestError::InvalidWindow {
                    t_min: lo,
                    t_max: hi,
                });
            }
        }
        Ok(Self { t_min, t_max })
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    /// Window `[t_min, t_max]`; panics if `t_min > t_max`.
    pub fn between(t_min: f64, t_max: f64) -> Self {
        Self::new(Some(t_min), Some(t_max)).expect("t_min <= t_max")
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_min.is_none_or(|lo| t >= lo) && self.t_max.is_none_or(|hi| t <= hi)
    }

    /// Intersection of two windows. The result may be inverted (empty), in
    /// which case it contains no year.
    pub fn intersect(&self, other: &WindowSpec) -> WindowSpec {
        let pick = |a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64| match (a, b) {
            (Some(x), Some(y)) => Some(f(x, y)),
            (x, None) => x,
            (None, y) => y,
        };
        WindowSpec {
            t_min: pick(self.t_min, other.t_min, f64::max),
            t_max: pick(self.t_max, other.t_max, f64::min),
        }
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |v: Option<f64>, inf: &str| v.map_or(inf.to_string(), |t| t.to_string());
        write!(
            f,
            "[{}, {}]",
            end(self.t_min, "-inf"),
            end(self.t_max, "+inf")
        )
    }
}

/// Points of `series` inside `window`, order, label and unit preserved.
pub fn slice(series: &TimeSeries, window: &WindowSpec) -> TimeSeries {
    let (years, values) = series.points().filter(|(t, _)| window.contains(*t)).unzip();
    TimeSeries {
        label: series.label.clone(),
        unit: series.unit.clone(),
        years,
        values,
    }
}

fn parse_number(line: u64, field: &str, raw: &str) -> Result<f64, IngestError> {
    let trimmed = raw.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IngestError::NonNumeric {
            line,
            field: field.to_string(),
            value: trimmed.to_string(),
        })
}

fn parse_value(line: u64, field: &str, raw: &str) -> Result<f64, IngestError> {
    let v = parse_number(line, field, raw)?;
    if v <= 0.0 {
        return Err(IngestError::NonPositive { line, value: v });
    }
    Ok(v)
}

/// Physical 1-based line of a record. The reader's line counter and byte
/// offset both ignore skipped blank lines, so recount from the text.
fn line_of(text: &str, record: &csv::StringRecord) -> u64 {
    let bytes = text.as_bytes();
    let mut byte = record
        .position()
        .map_or(0, |p| p.byte() as usize)
        .min(bytes.len());
    while byte < bytes.len() && matches!(bytes[byte], b'\n' | b'\r') {
        byte += 1;
    }
    bytes[..byte].iter().filter(|&&b| b == b'\n').count() as u64 + 1
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn is_blank(record: &csv::StringRecord) -> bool {
    record.iter().all(|f| f.is_empty())
}

/// Parses the long `year,gdp` layout. The series label is empty; callers
/// attach one with [`TimeSeries::with_label`].
pub fn parse_long_csv(text: &str) -> Result<TimeSeries, IngestError> {
    let mut rdr = reader(text);
    let mut records = rdr.records();

    let header = loop {
        match records.next() {
            None => return Ok(TimeSeries::empty("", DEFAULT_UNIT)),
            Some(rec) => {
                let rec = rec?;
                if !is_blank(&rec) {
                    break rec;
                }
            }
        }
    };
    let header_ok = header.len() == 2
        && header[0].eq_ignore_ascii_case("year")
        && header[1].eq_ignore_ascii_case("gdp");
    if !header_ok {
        return Err(IngestError::Header {
            line: line_of(text, &header),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut seen: BTreeMap<u64, u64> = BTreeMap::new();
    let mut points = Vec::new();
    for rec in records {
        let rec = rec?;
        if is_blank(&rec) {
            continue;
        }
        let line = line_of(text, &rec);
        if rec.len() != 2 {
            return Err(IngestError::FieldCount {
                line,
                expected: 2,
                found: rec.len(),
            });
        }
        let year = parse_number(line, "year", &rec[0])?;
        let value = parse_value(line, "gdp", &rec[1])?;
        if seen.insert(year.to_bits(), line).is_some() {
            return Err(IngestError::DuplicateYear { year });
        }
        points.push((year, value));
    }
    TimeSeries::from_points("", DEFAULT_UNIT, points)
}

/// Parses a Maddison-style wide table and returns the row labelled
/// `row_label` (compared after trimming). Empty cells are skipped.
pub fn parse_wide_csv(text: &str, row_label: &str) -> Result<TimeSeries, IngestError> {
    let wanted = row_label.trim();
    let mut rdr = reader(text);
    let mut records = rdr.records();

    let header = loop {
        match records.next() {
            None => {
                return Err(IngestError::LabelNotFound {
                    label: wanted.to_string(),
                    available: Vec::new(),
                })
            }
            Some(rec) => {
                let rec = rec?;
                if !is_blank(&rec) {
                    break rec;
                }
            }
        }
    };
    let header_line = line_of(text, &header);
    // Column index -> year; columns with an empty header are ignored.
    let mut columns: Vec<Option<f64>> = vec![None];
    let mut header_years: BTreeMap<u64, ()> = BTreeMap::new();
    for cell in header.iter().skip(1) {
        if cell.is_empty() {
            columns.push(None);
            continue;
        }
        let year = parse_number(header_line, "year header", cell)?;
        if header_years.insert(year.to_bits(), ()).is_some() {
            return Err(IngestError::DuplicateYear { year });
        }
        columns.push(Some(year));
    }

    let mut available = Vec::new();
    let mut matches = Vec::new();
    for rec in records {
        let rec = rec?;
        if is_blank(&rec) {
            continue;
        }
        let label = rec[0].to_string();
        if label == wanted {
            matches.push(rec);
        }
        available.push(label);
    }

    match matches.len() {
        0 => Err(IngestError::LabelNotFound {
            label: wanted.to_string(),
            available,
        }),
        1 => {
            let rec = &matches[0];
            let line = line_of(text, rec);
            let mut points = Vec::new();
            for (idx, cell) in rec.iter().enumerate().skip(1) {
                if cell.is_empty() {
                    continue;
                }
                let Some(Some(year)) = columns.get(idx).copied() else {
                    return Err(IngestError::FieldCount {
                        line,
                        expected: columns.len(),
                        found: rec.len(),
                    });
                };
                let value = parse_value(line, &format!("cell for {year}"), cell)?;
                points.push((year, value));
            }
            TimeSeries::from_points(wanted, DEFAULT_UNIT, points)
        }
        count => Err(IngestError::AmbiguousLabel {
            label: wanted.to_string(),
            count,
        }),
    }
}
