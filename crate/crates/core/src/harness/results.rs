//! Result records, JSON-lines and CSV output.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::gups;
use crate::backproject::KernelConfig;
use crate::error::{Error, Result};

/// What was run, as stored in each result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecordConfig {
    pub kernel: KernelConfig,
    pub threads: usize,
    pub repetitions: usize,
    pub edge: usize,
    pub num_projections: usize,
    pub dataset: String,
}

/// One timed reconstruction. Serializes to one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunResult {
    pub timestamp: String,
    pub config: RunRecordConfig,
    pub gups_per_sec: f64,
    pub wall_time_sec: f64,
    pub rmse: f64,
    /// `+inf` for an exact match, written as the string `"inf"`.
    #[serde(with = "float_or_inf")]
    pub psnr: f64,
    pub kernel_label: String,
    pub clipped_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parallel_efficiency: Option<f64>,
    /// Every reconstructed voxel is finite.
    pub finite: bool,
}

impl RunResult {
    /// The stored throughput agrees with the stored time and dimensions.
    pub fn metric_consistent(&self) -> bool {
        let again = gups(
            self.config.edge,
            self.config.num_projections,
            self.wall_time_sec,
        );
        (again - self.gups_per_sec).abs() <= 1e-12 * again.abs()
    }

    /// Invariant violations, empty when the run is healthy.
    pub fn violations(&self, max_rmse: Option<f64>) -> Vec<String> {
        let mut v = Vec::new();
        if !self.finite {
            v.push("reconstruction contains non-finite voxels".to_string());
        }
        if !self.metric_consistent() {
            v.push(format!(
                "gupsPerSec {} disagrees with wall time {} s",
                self.gups_per_sec, self.wall_time_sec
            ));
        }
        if let Some(limit) = max_rmse {
            if !(self.rmse <= limit) {
                v.push(format!(
                    "rmse {:e} exceeds threshold {:e}",
                    self.rmse, limit
                ));
            }
        }
        v
    }
}

mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v)
        } else {
            Repr::Text(
                if v.is_nan() {
                    "nan"
                } else if *v > 0.0 {
                    "inf"
                } else {
                    "-inf"
                }
                .into(),
            )
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Appends one JSON line per result.
pub fn append_jsonl(path: impl AsRef<Path>, results: &[RunResult]) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for r in results {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CsvRow<'a> {
    timestamp: &'a str,
    kernel: &'a str,
    threads: usize,
    edge: usize,
    num_projections: usize,
    gups_per_sec: f64,
    wall_time_sec: f64,
    rmse: f64,
    psnr: f64,
    clipped_fraction: f64,
    parallel_efficiency: Option<f64>,
}

/// Writes a flat table for plotting, replacing any existing file.
pub fn write_csv(path: impl AsRef<Path>, results: &[RunResult]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in results {
        w.serialize(CsvRow {
            timestamp: &r.timestamp,
            kernel: &r.kernel_label,
            threads: r.config.threads,
            edge: r.config.edge,
            num_projections: r.config.num_projections,
            gups_per_sec: r.gups_per_sec,
            wall_time_sec: r.wall_time_sec,
            rmse: r.rmse,
            psnr: r.psnr,
            clipped_fraction: r.clipped_fraction,
            parallel_efficiency: r.parallel_efficiency,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
