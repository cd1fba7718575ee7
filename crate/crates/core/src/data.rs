//! CSV ingest, Mahalanobis QQ data and rendered test reports.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::gof::GofReport;
use crate::matrix::SpdMatrix;
use crate::sample::Sample;

/// Cell values read as missing.
pub const NA_MARKERS: &[&str] = &["", "NA", "na", "N/A", "n/a", "NaN", "nan", "NULL", "null", "."];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("non-numeric value '{value}' in column '{column}' (data row {row})")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("no complete rows remain after dropping missing values")]
    EmptyResult,
    #[error("no numeric columns selected")]
    NoColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub rows_read: usize,
    pub dropped_rows: usize,
    pub na_policy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub data: Sample,
    pub source: PathBuf,
    pub diagnostics: ParseDiagnostics,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn m(&self) -> usize {
        self.data.m()
    }
}

/// Read selected numeric columns (all columns when `columns` is `None`),
/// dropping every row with a missing value in a selected column.
pub fn ingest_csv(path: &Path, columns: Option<&[String]>) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut ds = ingest_reader(file, columns)?;
    ds.source = path.to_path_buf();
    Ok(ds)
}

pub fn ingest_reader<R: Read>(reader: R, columns: Option<&[String]>) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let selected: Vec<(usize, String)> = match columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .map(|i| (i, c.clone()))
                    .ok_or_else(|| DataError::UnknownColumn(c.clone()))
            })
            .collect::<Result<_, _>>()?,
        None => header.iter().cloned().enumerate().collect(),
    };
    if selected.is_empty() {
        return Err(DataError::NoColumns);
    }
    let m = selected.len();
    let mut values = Vec::new();
    let (mut rows_read, mut dropped) = (0, 0);
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        rows_read += 1;
        let mut row = Vec::with_capacity(m);
        let mut missing = false;
        for (idx, name) in &selected {
            let cell = record.get(*idx).unwrap_or("");
            if NA_MARKERS.contains(&cell) {
                missing = true;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(DataError::NonNumeric {
                        row: r + 1,
                        column: name.clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if missing {
            dropped += 1;
        } else {
            values.extend(row);
        }
    }
    let n = values.len() / m;
    if n == 0 {
        return Err(DataError::EmptyResult);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} of {rows_read} rows with missing values");
    }
    let data = Sample::from_rows(values, n, m).map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(Dataset {
        columns: selected.into_iter().map(|(_, c)| c).collect(),
        data,
        source: PathBuf::new(),
        diagnostics: ParseDiagnostics {
            rows_read,
            dropped_rows: dropped,
            na_policy: "drop-row".into(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub observed: f64,
}

/// Sorted squared Mahalanobis distances under the sample mean and unbiased
/// covariance, against `χ²_m` quantiles at `(i − 0.5)/n`.
pub fn mahalanobis_qq(x: &Sample) -> crate::Result<Vec<QqPoint>> {
    let (n, m) = (x.n(), x.m());
    let chi = ChiSquared::new(m as f64).map_err(|e| crate::GofError::InvalidParameter(e.to_string()))?;
    let mut observed = if n == 1 {
        vec![0.0]
    } else {
        let mean = x.column_means();
        let c = DMatrix::from_fn(n, m, |i, j| x.row(i)[j] - mean[j]);
        let cov = SpdMatrix::factorize(&(c.transpose() * &c / (n - 1) as f64))?;
        (0..n)
            .map(|i| cov.mahalanobis_sq(DVector::from_fn(m, |j, _| c[(i, j)]).as_slice()))
            .collect()
    };
    observed.sort_by(f64::total_cmp);
    Ok(observed
        .into_iter()
        .enumerate()
        .map(|(i, q)| QqPoint {
            theoretical: chi.inverse_cdf((i as f64 + 0.5) / n as f64),
            observed: q,
        })
        .collect())
}

pub fn qq_csv(points: &[QqPoint]) -> String {
    let mut out = String::from("theoretical,observed\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.theoretical, p.observed);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub t: usize,
    pub count: usize,
}

/// Counts of each bootstrap statistic value, ascending.
pub fn bootstrap_histogram(boot: &[usize]) -> Vec<HistogramBin> {
    let mut sorted = boot.to_vec();
    sorted.sort_unstable();
    let mut bins: Vec<HistogramBin> = Vec::new();
    for t in sorted {
        match bins.last_mut() {
            Some(b) if b.t == t => b.count += 1,
            _ => bins.push(HistogramBin { t, count: 1 }),
        }
    }
    bins
}

/// Machine-readable record of one `test` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRunReport {
    pub source: String,
    pub columns: Vec<String>,
    pub null: String,
    pub seed: u64,
    pub bootstrap_b: usize,
    pub parse: ParseDiagnostics,
    pub report: GofReport,
    pub histogram: Vec<HistogramBin>,
}

impl TestRunReport {
    pub fn new(ds: &Dataset, null: &str, seed: u64, bootstrap_b: usize, report: GofReport) -> Self {
        Self {
            source: ds.source.display().to_string(),
            columns: ds.columns.clone(),
            null: null.into(),
            seed,
            bootstrap_b,
            parse: ds.diagnostics.clone(),
            histogram: bootstrap_histogram(&report.boot_stats),
            report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn render_text(&self) -> String {
        let r = &self.report;
        let d = &r.fitted.diagnostics;
        let mut s = String::new();
        let _ = writeln!(s, "Nearest-neighbour goodness-of-fit test");
        let _ = writeln!(s, "  data         {} ({} rows, {} dropped)", self.source, r.n, self.parse.dropped_rows);
        let _ = writeln!(s, "  columns      {}", self.columns.join(", "));
        let _ = writeln!(s, "  null         {}", self.null);
        let _ = writeln!(s, "  dimension    n = {}, m = {}", r.n, r.m);
        let _ = writeln!(s, "  beta_hat     {:.4}{}", r.fitted.beta, if d.beta_clamped { " (at bound)" } else { "" });
        let _ = writeln!(s, "  T_obs        {} (n/2 = {}), z = {:.3}", r.t_obs, r.n as f64 / 2.0, r.z_obs);
        let _ = writeln!(s, "  bootstrap    B = {}, failed = {}, retried = {}", r.boot_stats.len() + r.failed_replicates, r.failed_replicates, r.retried_replicates);
        let _ = writeln!(s, "  p-value      {:.4}", r.p_value);
        let _ = writeln!(s, "  decision     {} at alpha = {}", if r.reject { "reject" } else { "do not reject" }, r.alpha);
        let _ = writeln!(
            s,
            "  fit          rho = {:.3}, Tyler {} iterations (residual {:.2e}{}), median {} iterations",
            d.rho,
            d.tyler_iterations,
            d.tyler_residual,
            if d.tyler_converged { "" } else { ", not converged" },
            d.median_iterations
        );
        let _ = writeln!(s, "  condition    {:.3e}", d.spectrum.condition_number);
        if !r.conforming {
            let _ = writeln!(s, "  note         bootstrap without refitting; p-value is not calibrated");
        }
        s
    }
}
