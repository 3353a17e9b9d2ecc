//! Workflow success predictor: message passing over the workflow DAG, a task
//! projection, and a fused MLP head.

mod config;
mod layer;
mod model;
mod train;

pub use config::{Arch, Normalization, Pool, PredictorConfig};
pub use layer::{GatLayer, GcnLayer, GnnLayer, Neighborhoods};
pub use model::{encode_task_text, GraphInput, Prediction, PredictorModel, SampleRef};
pub use train::{
    accuracy_of, gradient_check, loss_and_gradients, mean_loss, train, GradCheck, EncodedDataset, EpochRecord, TrainReport, TrainingSample,
};

use thiserror::Error;

use crate::encode::EncodeError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("invalid predictor config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}
