//! Metrics serialization: a flat CSV for plotting tools and an NDJSON sidecar
//! that reloads into the exact same [`StepRecord`]s.
//!
//! CSV layout: `step,volume,budget,dropped` followed by six columns per agent
//! (`bid_`, `served_`, `reward_`, `cumrev_`, `mean_`, `stddev_` + label), in
//! declaration order. Policy columns are empty for fixed agents and on steps
//! without a snapshot. Floats carry 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::simulation::StepRecord;

pub const CSV_FILE: &str = "metrics.csv";
pub const NDJSON_FILE: &str = "metrics.ndjson";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Decode {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("no records to write")]
    Empty,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn csv_header(records: &[StepRecord]) -> String {
    let mut header = String::from("step,volume,budget,dropped");
    if let Some(first) = records.first() {
        for a in &first.agents {
            for col in ["bid", "served", "reward", "cumrev", "mean", "stddev"] {
                let _ = write!(header, ",{col}_{}", a.label);
            }
        }
    }
    header
}

pub fn csv_row(r: &StepRecord) -> String {
    let mut row = format!(
        "{},{},{},{}",
        r.step,
        format_sig9(r.volume.value()),
        format_sig9(r.budget.value()),
        format_sig9(r.dropped.value())
    );
    for a in &r.agents {
        let _ = write!(
            row,
            ",{},{},{},{}",
            format_sig9(a.bid.value()),
            format_sig9(a.served.value()),
            format_sig9(a.reward.value()),
            format_sig9(a.cumulative_revenue.value())
        );
        match a.policy {
            Some(p) => {
                let _ = write!(row, ",{},{}", format_sig9(p.mean), format_sig9(p.stddev));
            }
            None => row.push_str(",,"),
        }
    }
    row
}

pub fn to_csv(records: &[StepRecord]) -> String {
    let mut out = csv_header(records);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn to_ndjson(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

/// Writes `metrics.csv` and `metrics.ndjson` into `dir`, creating it if needed.
pub fn write_metrics(records: &[StepRecord], dir: &Path) -> Result<(), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join(CSV_FILE);
    fs::write(&csv, to_csv(records)).map_err(io_err(&csv))?;
    let ndjson = dir.join(NDJSON_FILE);
    fs::write(&ndjson, to_ndjson(records)).map_err(io_err(&ndjson))?;
    Ok(())
}

/// Reads records back from an NDJSON sidecar.
pub fn read_ndjson(path: &Path) -> Result<Vec<StepRecord>, MetricsError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| MetricsError::Decode {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(100.0), "100");
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(2.0 / 3.0 * 1000.0), "666.666667");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(0.0000123), "1.23e-05");
        assert_eq!(format_sig9(0.000123), "0.000123");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(9.9999999999), "10");
    }
}
