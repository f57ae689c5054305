//! Trace CSV files with schema `run, iteration, variable, value`, plus a
//! small TOML manifest describing how an output directory was produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct TraceRow {
    pub run: usize,
    pub iteration: usize,
    pub variable: String,
    pub value: f64,
}

pub fn write_traces(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        wtr.serialize(row).map_err(csv_error(path))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error(path))?;
    rdr.deserialize()
        .map(|r| r.map_err(csv_error(path)))
        .collect()
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::MalformedFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Reshapes rows into per-variable, per-run series ordered by iteration.
/// Returns `(variables, series)` with `series[v][run]` a chain.
pub fn series_by_variable(rows: &[TraceRow]) -> (Vec<String>, Vec<Vec<Vec<f64>>>) {
    let mut variables: Vec<String> = Vec::new();
    for row in rows {
        if !variables.contains(&row.variable) {
            variables.push(row.variable.clone());
        }
    }
    let n_runs = rows.iter().map(|r| r.run + 1).max().unwrap_or(0);
    let mut series = vec![vec![Vec::new(); n_runs]; variables.len()];
    for row in rows {
        let v = variables.iter().position(|v| *v == row.variable).unwrap();
        series[v][row.run].push(row.value);
    }
    (variables, series)
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_runs: usize,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub model: String,
    pub dataset: String,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
