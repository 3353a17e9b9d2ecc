//! Graph neural network predictors of agentic-workflow success.
//!
//! The numeric core ([`nn`], [`gnn`]) is generic over [`scalar::Scalar`]; the
//! aliases below fix it to `f64`.

pub mod cli;
pub mod dataset;
pub mod dsl;
pub mod encode;
pub mod executor;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod search;
pub mod seed;
pub mod task;

pub type Matrix = nn::Matrix<f64>;
pub type PredictorModel = gnn::PredictorModel<f64>;
pub type GraphInput = gnn::GraphInput<f64>;
pub type EncodedDataset = gnn::EncodedDataset<f64>;
pub type AdamState = nn::AdamState<f64>;
