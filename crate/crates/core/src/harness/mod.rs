//! Experiment orchestration: config loading, the agent x mode x window x
//! ticker grid, report aggregation, persisted outputs and replay.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! resolved_config.json
//! report_set.json
//! aggregate.csv
//! aggregate_by_window_kind.csv
//! plots/alignment_<agent>_<market>.svg
//! runs/<run_id>/episode.json | transcript.jsonl | report.json | violations.txt | equity.svg
//! runs/<run_id>/failure.json          (failed cells only)
//! ```

mod config;
mod output;
mod replay;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::market_data::DataError;

pub use config::{load_config, ExperimentConfig, MarketConfig, RateLimit};
pub use output::{aggregate_csv, emit_reports, equity_svg, ReportFormats, AGGREGATE_HEADER};
pub use replay::{replay, ReplayFlag, ReplayOutcome};
pub use run::{
    aggregate, execute_plan, plan_experiment, run_experiment, transcript_jsonl, AggregateRow, AlignmentEntry,
    CellFailure, CellFilter, CellKey, ExperimentOutcome, Plan, PlannedCell, ReportSet, RunReport, TrapOutcome,
    REPORT_SET_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("invalid config at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error("invalid --only filter: {0}")]
    InvalidFilter(String),
    #[error("no cells selected")]
    NoCells,
    #[error("I/O error at {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("no transcripts found under {0}")]
    TranscriptMissing(PathBuf),
    #[error("corrupt transcript {path}: {reason}")]
    TranscriptCorrupt { path: PathBuf, reason: String },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.into(),
            reason: err.to_string(),
        }
    }
}
