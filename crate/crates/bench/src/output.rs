//! Result files: raw rows, per-iteration traces, and summaries recomputed
//! from the rows.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub experiment: String,
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub iter: usize,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Identifies one (family, N, trial) unit of work.
pub type UnitKey = (String, usize, usize);

pub trait Keyed {
    fn key(&self) -> UnitKey;
}

impl Keyed for ResultRow {
    fn key(&self) -> UnitKey {
        (self.family.clone(), self.n, self.trial)
    }
}

impl Keyed for TraceRow {
    fn key(&self) -> UnitKey {
        (self.family.clone(), self.n, self.trial)
    }
}

pub const ROWS_HEADER: [&str; 7] = ["experiment", "family", "N", "trial", "seed", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 7] = ["experiment", "family", "N", "metric", "mean", "std", "count"];
pub const TRACES_HEADER: [&str; 8] = ["experiment", "family", "N", "trial", "seed", "algorithm", "iter", "phi"];

fn csv_err(path: &Path, e: csv::Error) -> BenchError {
    BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> BenchError {
    BenchError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads a result file; a missing file reads as empty.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BenchError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_err(path, e))).collect()
}

/// Writes `records` under `header` through a temporary file and a rename,
/// so an interrupted run never leaves a truncated file.
pub fn write_csv_atomic<T: Serialize>(path: &Path, header: &[&str], records: &[T]) -> Result<(), BenchError> {
    let tmp = tmp_path(path);
    {
        let file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        w.write_record(header).map_err(|e| csv_err(&tmp, e))?;
        for r in records {
            w.serialize(r).map_err(|e| csv_err(&tmp, e))?;
        }
        w.flush().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), BenchError> {
    let tmp = tmp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Stable sort by unit key; rows within a unit keep their emission order.
pub fn sort_by_unit<T: Keyed>(records: &mut [T]) {
    records.sort_by_key(|r| r.key());
}

pub fn completed_units(rows: &[ResultRow]) -> BTreeSet<UnitKey> {
    rows.iter().map(Keyed::key).collect()
}

/// Mean, sample standard deviation and count per (family, N, metric), in
/// order of first appearance in `rows`.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, usize, String)> = Vec::new();
    let mut groups: HashMap<(String, String, usize, String), Vec<f64>> = HashMap::new();
    for r in rows {
        let key = (r.experiment.clone(), r.family.clone(), r.n, r.metric.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &groups[&key];
            let (mean, std) = mean_std(values);
            SummaryRow {
                experiment: key.0,
                family: key.1,
                n: key.2,
                metric: key.3,
                mean,
                std,
                count: values.len(),
            }
        })
        .collect()
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(family: &str, n: usize, trial: usize, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment: "fig2".into(),
            family: family.into(),
            n,
            trial,
            seed: 1 + trial as u64,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ROWS_FILE);
        let rows = vec![row("a", 10, 0, "x", 0.1 + 0.2), row("a", 10, 0, "y", 7.8e-5)];
        write_csv_atomic(&path, &ROWS_HEADER, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("experiment,family,N,trial,seed,metric,value\n"));
        assert_eq!(read_csv::<ResultRow>(&path).unwrap(), rows);
        assert!(!tmp_path(&path).exists());
    }

    #[test]
    fn missing_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_csv::<ResultRow>(&dir.path().join("none.csv")).unwrap().is_empty());
    }

    #[test]
    fn summary_groups_and_orders() {
        let mut rows = vec![
            row("b", 10, 1, "x", 3.0),
            row("a", 10, 1, "x", 1.0),
            row("a", 10, 0, "x", 3.0),
            row("a", 10, 0, "y", 5.0),
        ];
        sort_by_unit(&mut rows);
        assert_eq!(rows[0].trial, 0);
        let s = summarize(&rows);
        let got: Vec<_> = s.iter().map(|r| (r.family.as_str(), r.metric.as_str(), r.mean, r.count)).collect();
        assert_eq!(got, vec![("a", "x", 2.0, 2), ("a", "y", 5.0, 1), ("b", "x", 3.0, 1)]);
        assert!((s[0].std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[1].std, 0.0);
    }
}
