//! Experiment harness over `spiked-core`.
//!
//! A run expands an [`ExperimentConfig`] into grid cells, executes every
//! (cell, trial) pair with a seed derived from the master seed, and writes
//! `results.csv`, `timings.csv` and `summary.json` into the output directory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod row;
pub mod runner;
pub mod summary;

pub use config::{Cell, Experiment, ExperimentConfig, Strength, Tolerances};
pub use error::{CliError, Result};
pub use row::ResultRow;
pub use runner::{run_experiment, RunOutcome};
pub use summary::{emit_summary, Summary};
