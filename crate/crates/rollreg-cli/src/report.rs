//! CSV artifacts: `runs.csv` (one row per finished run), one
//! `windows_<hash>.csv` per run with the full per-window regret table, and
//! `failures.csv` when any grid point failed. All files are pure functions
//! of (config, seed): floats serialize in their shortest round-tripping
//! form and reruns are byte-identical.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::runner::{FailureRecord, RunOutcome, RunRecord};
use crate::{Error, Result};

/// `runs.csv` header, frozen: downstream tooling may key on these names.
pub const RUNS_HEADER: &str = "config_hash,seed,sweep,source,task,optimizer,schedule,eta1,\
                               t_window,samples,max_regret,argmax_offset,first_window_loss,\
                               final_window_loss,d_inf,g_inf,alpha,g2_inf,mu,min_cosine";

/// One `runs.csv` row. Field order defines the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_hash: String,
    pub seed: u64,
    pub sweep: String,
    pub source: String,
    pub task: String,
    pub optimizer: String,
    pub schedule: String,
    pub eta1: f64,
    pub t_window: usize,
    pub samples: usize,
    pub max_regret: f64,
    pub argmax_offset: usize,
    /// Mean per-sample online loss over the earliest evaluated window.
    pub first_window_loss: f64,
    /// Mean per-sample online loss over the latest evaluated window.
    pub final_window_loss: f64,
    pub d_inf: f64,
    pub g_inf: f64,
    pub alpha: Option<f64>,
    pub g2_inf: Option<f64>,
    pub mu: Option<f64>,
    pub min_cosine: Option<f64>,
}

/// Mean per-sample online loss of the window at the given extreme offset.
fn window_mean_loss(record: &RunRecord, latest: bool) -> f64 {
    let pick = record
        .report
        .records
        .iter()
        .reduce(|a, b| {
            let better = if latest { b.offset > a.offset } else { b.offset < a.offset };
            if better { b } else { a }
        })
        .expect("reports carry at least one window");
    pick.online_loss / (pick.t_window + 1) as f64
}

impl RunRow {
    pub fn from_record(r: &RunRecord) -> Self {
        Self {
            config_hash: r.config_hash.clone(),
            seed: r.seed,
            sweep: r.sweep.clone(),
            source: r.source.clone(),
            task: r.task.clone(),
            optimizer: r.optimizer.clone(),
            schedule: r.schedule.clone(),
            eta1: r.eta1,
            t_window: r.t_window,
            samples: r.samples,
            max_regret: r.report.max_regret,
            argmax_offset: r.report.argmax_offset,
            first_window_loss: window_mean_loss(r, false),
            final_window_loss: window_mean_loss(r, true),
            d_inf: r.stats.d_inf,
            g_inf: r.stats.g_inf,
            alpha: r.stats.alpha,
            g2_inf: r.stats.g2_inf,
            mu: r.stats.mu,
            min_cosine: r.stats.min_cosine,
        }
    }
}

/// Everything `emit_csv` wrote, in writing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenFiles {
    pub runs: PathBuf,
    pub windows: Vec<PathBuf>,
    pub failures: Option<PathBuf>,
}

/// Writes `runs.csv`, one `windows_<hash>.csv` per record, and
/// `failures.csv` iff any point failed. Creates `dir` if needed.
pub fn emit_csv(outcomes: &[RunOutcome], dir: &Path) -> Result<WrittenFiles> {
    if outcomes.is_empty() {
        return Err(Error::Invalid("no runs to report".into()));
    }
    std::fs::create_dir_all(dir)?;

    let records: Vec<&RunRecord> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Record(r) => Some(r.as_ref()),
            RunOutcome::Failure(_) => None,
        })
        .collect();
    let failures: Vec<&FailureRecord> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Failure(f) => Some(f),
            RunOutcome::Record(_) => None,
        })
        .collect();

    let runs_path = dir.join("runs.csv");
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&runs_path)?));
    for record in &records {
        writer.serialize(RunRow::from_record(record))?;
    }
    // An all-failure grid still gets a parseable header-only file.
    if records.is_empty() {
        writer.write_record(RUNS_HEADER.split(','))?;
    }
    writer.flush()?;
    drop(writer);

    let mut windows = Vec::with_capacity(records.len());
    for record in &records {
        let path = dir.join(format!("windows_{}.csv", record.config_hash));
        record.report.write_csv(BufWriter::new(File::create(&path)?))?;
        windows.push(path);
    }

    let failures_path = if failures.is_empty() {
        None
    } else {
        let path = dir.join("failures.csv");
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        writer.write_record(["config_hash", "seed", "sweep", "error"])?;
        for f in &failures {
            writer.write_record([
                f.config_hash.as_str(),
                &f.seed.to_string(),
                f.sweep.as_str(),
                f.error.as_str(),
            ])?;
        }
        writer.flush()?;
        Some(path)
    };

    Ok(WrittenFiles { runs: runs_path, windows, failures: failures_path })
}

/// Typed read-back of `runs.csv`.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// One row of a `windows_<hash>.csv` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct WindowRow {
    pub offset: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub online_loss: f64,
    pub offline_loss: f64,
    pub regret: f64,
    pub oracle_iters: u64,
    pub oracle_residual: f64,
    pub converged: bool,
}

/// Typed read-back of one per-run window table.
pub fn read_windows_csv(path: &Path) -> Result<Vec<WindowRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
