use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use spiked_core::rng::trial_seed;

use crate::config::{describe, expand, ExperimentConfig};
use crate::error::Result;
use crate::experiments::{run_trial, trials_per_cell};
use crate::row::{ResultRow, RowWriter, TimingRow};
use crate::summary::{emit_summary, Summary};

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

impl RunOutcome {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed).count()
    }
}

/// Validates the grid, then runs it cell by cell. Trials of a cell run in
/// parallel but are written in trial order, and each finished cell is flushed
/// before the next starts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let cells = expand(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let results_path = cfg.out.join("results.csv");
    let summary_path = cfg.out.join("summary.json");
    let mut results = RowWriter::new(BufWriter::new(File::create(&results_path)?))?;
    let mut timings = csv::Writer::from_path(cfg.out.join("timings.csv"))?;

    let trials = trials_per_cell(cfg);
    let mut rows = Vec::new();
    for cell in &cells {
        let done: Vec<(Vec<ResultRow>, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let start = Instant::now();
                let out = run_trial(cfg, cell, t, trial_seed(cfg.seed, cell.index as u64, t as u64));
                (out, start.elapsed().as_secs_f64())
            })
            .collect();
        for (out, seconds) in done {
            let share = seconds / out.len() as f64;
            for row in out {
                results.write(&row)?;
                timings.serialize(TimingRow { cell: row.cell, trial: row.trial, label: row.label.clone(), seconds: share })?;
                rows.push(row);
            }
        }
        results.flush()?;
        timings.flush()?;
    }

    let mut summary = emit_summary(&rows)?;
    summary.config = Some(describe(cfg));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome { rows, summary, results_path, summary_path })
}
