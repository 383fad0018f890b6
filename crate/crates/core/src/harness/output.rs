//! Result persistence: JSON report, per-draw CSV, config echo and manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::ExperimentOutcome;

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub draw_id: usize,
    pub m: usize,
    pub rho: f64,
    pub delta: f64,
    pub lhs: f64,
    pub empirical_loss: f64,
    pub complexity_mean: f64,
    pub complexity_stderr: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "draw_id",
    "m",
    "rho",
    "delta",
    "lhs",
    "empirical_loss",
    "complexity_mean",
    "complexity_stderr",
    "rhs",
    "holds",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub version: String,
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    writer.write_record(CSV_COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Schema(format!("unexpected CSV header {header:?}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from_json)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `results.json`, one CSV per table, `config.json` and `manifest.json` into `dir`.
pub fn emit_results(outcome: &ExperimentOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("results.json"), outcome)?;
    for (name, rows) in outcome.tables(cfg) {
        write_csv(&dir.join(name), &rows)?;
    }
    write_json(&dir.join("config.json"), cfg)?;
    let manifest = Manifest {
        experiment: cfg.experiment.clone(),
        seed: cfg.seed,
        version: crate::VERSION.to_string(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}
