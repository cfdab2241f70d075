use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::ks::normal_quantile;
use crate::mc::summary::{CellSummary, SummaryStats};
use crate::mc::ReplicationRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Input(format!("unknown report format {other:?}"))),
        }
    }
}

fn replications_csv(rows: &[ReplicationRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv("replications.csv", e))?;
    }
    w.into_inner().map_err(|e| Error::Input(e.to_string()))
}

/// Scaled errors of one cell, as stored in the rows.
fn cell_errors(cell: &CellSummary, rows: &[ReplicationRow]) -> Vec<f64> {
    let pick: fn(&ReplicationRow) -> Option<f64> = match cell.estimator.as_str() {
        "mu_hat" => |r| r.e_mu,
        "k_hat" => |r| r.e_k,
        s if s.starts_with("mu_ls_") => |r| r.e_mu_ls,
        _ => |r| r.e_k_ls,
    };
    let mode = cell.estimator.strip_prefix("mu_ls_").or_else(|| cell.estimator.strip_prefix("k_ls_"));
    let first_mode = rows.first().map(|r| r.mode);
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.horizon == cell.horizon)
        .filter(|r| match mode {
            Some(m) => r.mode.as_str() == m,
            None => Some(r.mode) == first_mode,
        })
        .filter_map(pick)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Q-Q table: plotting position, standard normal quantile, empirical
/// quantile, then the quantile under each candidate law.
fn qq_csv(cell: &CellSummary, errors: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let name = || format!("qq_{}_{}.csv", cell.estimator, cell.horizon);
    let mut header = vec!["p".to_string(), "z".into(), "empirical".into()];
    header.extend(cell.candidates.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(|e| Error::csv(name(), e))?;
    let n = errors.len() as f64;
    for (i, e) in errors.iter().enumerate() {
        let p = (i as f64 + 0.5) / n;
        let z = normal_quantile(p);
        let mut rec = vec![p.to_string(), z.to_string(), e.to_string()];
        rec.extend(cell.candidates.iter().map(|c| (z * c.variance.sqrt()).to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(name(), e))?;
    }
    w.into_inner().map_err(|e| Error::Input(e.to_string()))
}

/// Writes the replication table, `summary.json` and one Q-Q table per cell
/// into `out_dir`, returning the paths written.
///
/// All content is rendered before the first file is created, so a failure
/// other than IO leaves the directory untouched.
pub fn emit_report(
    summary: &SummaryStats,
    rows: &[ReplicationRow],
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Input("no replication rows to report".into()));
    }
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    match format {
        ReportFormat::Csv => files.push(("replications.csv".into(), replications_csv(rows)?)),
        ReportFormat::Json => {
            files.push(("replications.json".into(), (serde_json::to_string_pretty(rows)? + "\n").into_bytes()))
        }
    }
    files.push(("summary.json".into(), summary.to_json()?.into_bytes()));
    for cell in &summary.cells {
        let errors = cell_errors(cell, rows);
        files.push((format!("qq_{}_{}.csv", cell.estimator, cell.horizon), qq_csv(cell, &errors)?));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_replications_csv(path: &Path) -> Result<Vec<ReplicationRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}

pub fn read_replications_json(path: &Path) -> Result<Vec<ReplicationRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
