//! Synthetic dataset construction: workflow and task generation, probe-based
//! task filtering, labeling, and seeded train/val/test splits.

mod build;
mod generate;
mod labels;

pub use build::{build_dataset, load_dataset_dir, sha256_hex, BuiltDataset, DatasetConfig, DatasetSummary, LoadedDataset, SplitRatios};
pub use generate::{
    filter_tasks, generate_tasks, generate_workflows, FilterOutcome, FilterSpec, TaskGenSpec, TaskRate, WorkflowGenSpec,
    CANONICAL_SKILL_ORDER, DEFAULT_PROMPTS,
};
pub use labels::{label_dataset, load_labels, parse_labels, reduce_majority, split, LabeledSample, SplitSpec, Splits, MIN_SPLIT_SAMPLES};

use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::DslError;
use crate::executor::ExecError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("probe workflow set is empty")]
    EmptyProbeSet,
    #[error("{found} samples, at least {needed} needed to split")]
    TooFewSamples { found: usize, needed: usize },
    #[error("line {line}: unknown id {id:?}")]
    UnresolvedId { line: usize, id: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl From<DslError> for DatasetError {
    fn from(e: DslError) -> Self {
        match e {
            DslError::Format { line, message } => DatasetError::Format { line, message },
            DslError::Io { path, source } => DatasetError::Io { path, source },
            other => DatasetError::Format { line: 0, message: other.to_string() },
        }
    }
}
