//! Text encoders producing fixed-width node and task features.
//!
//! Two modes are supported:
//!
//! * **hashing**: signed feature hashing of lowercase alphanumeric tokens,
//!   followed by L2 normalization. Each token is hashed with FNV-1a-64 whose
//!   offset basis is XOR-ed with the configured seed; the low bits pick the
//!   coordinate (`h mod dim`), the top bit picks the sign.
//! * **file**: exact-match lookup into a JSONL file of precomputed vectors,
//!   `{"text": str, "vec": [f64; dim]}` per line.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::WorkflowGraph;
use crate::nn::Matrix;
use crate::scalar::Scalar;

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET_BASIS ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Lowercase, then split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Hashing,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub mode: EmbeddingMode,
    pub seed: u64,
    pub file_path: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { dim: 384, mode: EmbeddingMode::Hashing, seed: 0, file_path: None }
    }
}

impl EmbeddingConfig {
    pub fn hashing(dim: usize, seed: u64) -> Self {
        Self { dim, mode: EmbeddingMode::Hashing, seed, file_path: None }
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.dim == 0 {
            return Err(EncodeError::Config("embedding dim must be at least 1".into()));
        }
        if self.mode == EmbeddingMode::File && self.file_path.is_none() {
            return Err(EncodeError::Config("file mode requires file_path".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("invalid embedding config: {0}")]
    Config(String),
    #[error("no embedding for text {0:?}")]
    EmbeddingMiss(String),
    #[error("embedding file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    text: String,
    vec: Vec<f64>,
}

/// Encoder built from an [`EmbeddingConfig`]; file mode loads the table once.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    cfg: EmbeddingConfig,
    table: Option<HashMap<String, Vec<f64>>>,
}

impl TextEncoder {
    pub fn new(cfg: EmbeddingConfig) -> Result<Self, EncodeError> {
        cfg.validate()?;
        let table = match cfg.mode {
            EmbeddingMode::Hashing => None,
            EmbeddingMode::File => {
                let path = cfg.file_path.as_ref().expect("validated");
                Some(load_embedding_file(path, cfg.dim)?)
            }
        };
        Ok(Self { cfg, table })
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim
    }

    pub fn encode_text(&self, text: &str) -> Result<Vec<f64>, EncodeError> {
        match &self.table {
            None => Ok(hash_encode(self.cfg.dim, self.cfg.seed, text)),
            Some(table) => table.get(text).cloned().ok_or_else(|| EncodeError::EmbeddingMiss(text.to_owned())),
        }
    }

    /// Row `i` holds the encoding of node `i`'s prompt, in node order.
    pub fn encode_nodes<T: Scalar>(&self, graph: &WorkflowGraph) -> Result<Matrix<T>, EncodeError> {
        let mut m = Matrix::zeros(graph.nodes.len(), self.cfg.dim);
        for (i, node) in graph.nodes.iter().enumerate() {
            let v = self.encode_text(&node.prompt)?;
            for (dst, src) in m.row_mut(i).iter_mut().zip(v) {
                *dst = T::from_f64_lossy(src);
            }
        }
        Ok(m)
    }
}

/// Convenience wrapper for callers holding only a config.
pub fn encode_text(cfg: &EmbeddingConfig, text: &str) -> Result<Vec<f64>, EncodeError> {
    TextEncoder::new(cfg.clone())?.encode_text(text)
}

fn hash_encode(dim: usize, seed: u64, text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; dim];
    for token in tokenize(text) {
        let h = fnv1a64(seed, token.as_bytes());
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn load_embedding_file(path: &Path, dim: usize) -> Result<HashMap<String, Vec<f64>>, EncodeError> {
    let text = fs::read_to_string(path).map_err(|source| EncodeError::Io { path: path.to_owned(), source })?;
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(line).map_err(|e| EncodeError::Format { line: line_no, message: e.to_string() })?;
        if rec.vec.len() != dim {
            return Err(EncodeError::Format {
                line: line_no,
                message: format!("vector has length {}, expected {dim}", rec.vec.len()),
            });
        }
        if rec.vec.iter().any(|x| !x.is_finite()) {
            return Err(EncodeError::Format { line: line_no, message: "non-finite entry".into() });
        }
        if table.insert(rec.text.clone(), rec.vec).is_some() {
            return Err(EncodeError::Format { line: line_no, message: format!("duplicate text {:?}", rec.text) });
        }
    }
    Ok(table)
}
