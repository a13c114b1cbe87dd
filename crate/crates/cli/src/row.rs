use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{ensemble_name, Cell, ExperimentConfig};
use crate::error::Result;

/// First line of every `results.csv`.
pub const SCHEMA_LINE: &str = "# spiked-cli results schema v1";

/// One (cell, trial) outcome. Columns that do not apply to an experiment are
/// left empty.
///
/// `hit` is the per-trial event whose rate the summary reports: a correct
/// decision (detect), post-boost correlation above the strong threshold
/// (recover), `lambda1 >= Emax` (null-spectrum), pairing sum inside the
/// Monte-Carlo band (wick-verify), all methods agreeing within bounds
/// (path-equivalence), chosen-input gain above the target (quantum-overlap).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub p: usize,
    pub n: usize,
    pub n_bos: usize,
    pub lambda_bar: f64,
    pub ratio: Option<f64>,
    pub ensemble: String,
    /// Topology (wick-verify) or cost variant (speedup-table).
    pub label: Option<String>,
    pub planted: Option<bool>,
    pub lambda1: Option<f64>,
    pub e0: Option<f64>,
    pub emax: Option<f64>,
    pub ecut: Option<f64>,
    pub decision: Option<String>,
    pub converged: Option<bool>,
    pub overlap_ratio: Option<f64>,
    pub rounding_corr: Option<f64>,
    pub corr: Option<f64>,
    /// Recovery started from a state below `Ecut`.
    pub below_cut: Option<bool>,
    pub success_prob: Option<f64>,
    pub success_mixed: Option<f64>,
    pub cost: Option<f64>,
    pub log_cost: Option<f64>,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub stderr: Option<f64>,
    pub hit: Option<bool>,
    /// Structural bound of the experiment: the variance floor (wick-verify) or
    /// the call and frame bounds (path-equivalence).
    pub bound_holds: Option<bool>,
    pub failed: bool,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn for_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64) -> Self {
        ResultRow {
            experiment: cfg.experiment.name().into(),
            cell: cell.index,
            trial,
            seed,
            p: cell.order,
            n: cell.dim,
            n_bos: cell.n_bos,
            lambda_bar: cell.lambda_bar,
            ratio: cell.ratio,
            ensemble: ensemble_name(cfg.ensemble),
            label: cell.topology.clone(),
            ..Default::default()
        }
    }

    pub fn fail(mut self, err: impl std::fmt::Display) -> Self {
        self.failed = true;
        self.error = Some(err.to_string());
        self
    }
}

/// Wall time of one row, kept out of `results.csv` so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub cell: usize,
    pub trial: usize,
    pub label: Option<String>,
    pub seconds: f64,
}

pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(mut w: W) -> Result<Self> {
        writeln!(w, "{SCHEMA_LINE}")?;
        Ok(RowWriter { inner: csv::Writer::from_writer(w) })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads rows back, skipping the schema comment.
pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let rows = rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}
