//! End-to-end experiment driver: ingest, train, dream toward a high and a
//! low target, and report how the oracle-scored distribution moved.

mod config;
mod dataset;
mod experiment;
mod report;

use thiserror::Error;

pub use config::{ExperimentConfig, Split};
pub use dataset::{ingest, ingest_str, Dataset, DatasetEntry, Skip, SkipKind};
pub use experiment::{
    build_oracle, dream_phase, run_experiment, write_outputs, ArmReport, ExperimentOutcome, ExperimentReport, Failure,
    HistogramRow, TrainingSummary,
};
pub use report::{
    composition_shift, histogram, probe_trajectories, trajectory_composition_shift, CompositionShift, ElementShift,
    HistogramBin,
};

use crate::dream::DreamError;
use crate::net::NetError;
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable { path: String, source: std::io::Error },
    #[error("dataset has no usable molecules")]
    EmptyDataset,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("bad histogram range: {0}")]
    BadRange(String),
    #[error("nothing to summarise")]
    EmptyInput,
    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Dream(#[from] DreamError),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl PipelineError {
    /// Whether the error stems from how the program was invoked (bad
    /// configuration) rather than from the data it was given.
    pub fn is_usage(&self) -> bool {
        matches!(self, PipelineError::Config { .. })
    }
}
