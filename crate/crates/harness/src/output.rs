//! Result rows, per-cell summaries and the files written for a run.
//!
//! Files in the output directory:
//!
//! - `<experiment>.csv`: one [`ResultRow`] per fit, header
//!   `experiment,series,strategy,trial,round,level,dosage_id,mse,branch,seed`
//! - `summary.csv`: one [`SummaryRow`] per (series, strategy, round, level)
//! - `manifest.txt`: the resolved configuration and the harness version
//!
//! `emulate` writes `emulate.csv` (header `candidate,kl,dosage`) in place of
//! the first two.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::experiments::{EmulateReport, Report};
use crate::Result;

/// One fitted estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: &'static str,
    /// Series label such as `p=10,n=200`.
    pub series: String,
    pub strategy: &'static str,
    pub trial: usize,
    pub round: usize,
    /// ℓ∞ distance, or dosage value for the uniform sweep; 0 when unused.
    pub level: f64,
    pub dosage_id: usize,
    pub mse: f64,
    pub branch: &'static str,
    /// Seed of the assignment stream that produced the data.
    pub seed: u64,
    #[serde(skip)]
    pub series_index: usize,
}

impl ResultRow {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.series_index
            .cmp(&other.series_index)
            .then(self.level.total_cmp(&other.level))
            .then(self.strategy.cmp(other.strategy))
            .then(self.trial.cmp(&other.trial))
            .then(self.round.cmp(&other.round))
    }
}

/// Mean and sample standard deviation of `mse` over one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: &'static str,
    pub series: String,
    pub strategy: &'static str,
    pub round: usize,
    pub level: f64,
    pub count: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub ols: usize,
    pub ridge: usize,
    pub null: usize,
}

/// Sorts rows by (series, level, strategy, trial, round).
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.key_cmp(b));
}

/// Aggregates rows over dosages and trials, in first-seen cell order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: Vec<(&ResultRow, Vec<&ResultRow>)> = Vec::new();
    let same = |a: &ResultRow, b: &ResultRow| {
        a.series_index == b.series_index && a.strategy == b.strategy && a.round == b.round && a.level == b.level
    };
    for row in rows {
        match cells.iter_mut().find(|(head, _)| same(head, row)) {
            Some((_, members)) => members.push(row),
            None => cells.push((row, vec![row])),
        }
    }
    cells
        .into_iter()
        .map(|(head, members)| {
            let count = members.len();
            let mean = members.iter().map(|r| r.mse).sum::<f64>() / count as f64;
            let std = if count > 1 {
                (members.iter().map(|r| (r.mse - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            let branches = |b: &str| members.iter().filter(|r| r.branch == b).count();
            SummaryRow {
                experiment: head.experiment,
                series: head.series.clone(),
                strategy: head.strategy,
                round: head.round,
                level: head.level,
                count,
                mean_mse: mean,
                std_mse: std,
                ols: branches("ols"),
                ridge: branches("ridge"),
                null: branches("null"),
            }
        })
        .collect()
}

/// Writes all files for `report` into `cfg.out`; returns their paths.
pub fn write_report(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match &report.emulate {
        Some(em) => written.push(write_emulate(dir, em)?),
        None => {
            let rows_path = dir.join(format!("{}.csv", cfg.experiment));
            write_csv(&rows_path, &report.rows)?;
            let summary_path = dir.join("summary.csv");
            write_csv(&summary_path, &report.summary)?;
            written.extend([rows_path, summary_path]);
        }
    }
    let manifest = dir.join("manifest.txt");
    fs::write(
        &manifest,
        format!("version = {}\n{}", env!("CARGO_PKG_VERSION"), cfg.manifest()),
    )?;
    written.push(manifest);
    Ok(written)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_emulate(dir: &Path, em: &EmulateReport) -> Result<PathBuf> {
    let path = dir.join("emulate.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["candidate", "kl", "dosage"])?;
    let fmt = |d: &[f64]| d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    w.write_record(["marginal".to_string(), em.kl.to_string(), fmt(&em.dosage)])?;
    for (i, (d, kl)) in em.comparators.iter().enumerate() {
        w.write_record([format!("random{i}"), kl.to_string(), fmt(d)])?;
    }
    w.flush()?;
    Ok(path)
}
