use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::experiment::{ExperimentSpec, Tolerance};
use super::stats::Interval;
use crate::error::{Error, Result};

/// Significant digits kept for every reported number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub statistic: String,
    /// Module operation that supplies the analytic value.
    pub operation: String,
    pub empirical: f64,
    pub successes: Option<u64>,
    pub trials: u64,
    pub analytic: Interval,
    /// Exact rational form of the analytic value, when available.
    pub exact: Option<String>,
    /// Range the empirical value must fall in.
    pub acceptance: Interval,
    pub tolerance: Tolerance,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub construction: String,
    pub trials: u64,
    pub master_seed: u64,
    pub generator: String,
    pub comparisons: Vec<ComparisonRecord>,
    pub diagnostics: BTreeMap<String, u64>,
    pub samples: Vec<Value>,
    pub all_passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub config: ExperimentSpec,
}

impl Report {
    pub(crate) fn rounded(mut self) -> Self {
        let interval = |i: Interval| Interval::new(round_sig(i.lo), round_sig(i.hi));
        for c in &mut self.comparisons {
            c.empirical = round_sig(c.empirical);
            c.analytic = interval(c.analytic);
            c.acceptance = interval(c.acceptance);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

const CSV_HEADER: [&str; 11] = [
    "statistic",
    "operation",
    "empirical",
    "successes",
    "trials",
    "analytic_lo",
    "analytic_hi",
    "exact",
    "acceptance_lo",
    "acceptance_hi",
    "pass",
];

/// Writes the report as one JSON document, or as CSV with one row per comparison.
pub fn emit_report(report: &Report, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    let io = |source| Error::Io {
        path: "<output>".into(),
        source,
    };
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out).map_err(io)?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| match e.into_kind() {
                csv::ErrorKind::Io(source) => io(source),
                other => Error::InvalidParameter(format!("csv: {other:?}")),
            };
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for c in &report.comparisons {
                w.write_record([
                    c.statistic.clone(),
                    c.operation.clone(),
                    c.empirical.to_string(),
                    c.successes.map(|s| s.to_string()).unwrap_or_default(),
                    c.trials.to_string(),
                    c.analytic.lo.to_string(),
                    c.analytic.hi.to_string(),
                    c.exact.clone().unwrap_or_default(),
                    c.acceptance.lo.to_string(),
                    c.acceptance.hi.to_string(),
                    c.pass.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(())
}

/// [`emit_report`] into a file; failures name the path.
pub fn write_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    let with_path = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(with_path)?;
    emit_report(report, format, &mut file).map_err(|e| match e {
        Error::Io { source, .. } => with_path(source),
        other => other,
    })
}
