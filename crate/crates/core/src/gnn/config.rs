use serde::{Deserialize, Serialize};

use crate::gnn::GnnError;
use crate::nn::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Gcn,
    Gat,
}

impl std::str::FromStr for Arch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gcn" => Ok(Arch::Gcn),
            "gat" => Ok(Arch::Gat),
            other => Err(format!("unknown architecture {other:?} (expected gcn or gat)")),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Gat => "gat",
        })
    }
}

/// GCN neighbourhood weighting. Both include the node itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1 / |S_i|` over `S_i = {i} ∪ N_in(i)`.
    Mean,
    /// `1 / sqrt(|S_i| |S_j|)`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    /// Width of the text encodings fed to the model.
    pub input_dim: usize,
    pub pool: Pool,
    pub normalization: Normalization,
    /// Also pass messages against edge direction.
    pub bidirectional: bool,
    pub epochs: usize,
    pub batch: usize,
    pub threshold: f64,
    pub seed: u64,
    pub optimizer: AdamConfig,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub patience: Option<usize>,
    pub gat_negative_slope: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Gcn,
            layers: 2,
            hidden: 512,
            input_dim: 384,
            pool: Pool::Mean,
            normalization: Normalization::Mean,
            bidirectional: false,
            epochs: 200,
            batch: 64,
            threshold: 0.5,
            seed: 0,
            optimizer: AdamConfig::default(),
            patience: None,
            gat_negative_slope: 0.2,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::Config(m.to_owned()));
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.hidden == 0 || self.input_dim == 0 {
            return bad("hidden and input_dim must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if !(self.optimizer.lr >= 0.0) || !(self.optimizer.weight_decay >= 0.0) {
            return bad("learning rate and weight decay must be non-negative");
        }
        Ok(())
    }

    /// Number of learnable scalars implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        for l in 0..self.layers {
            let input = if l == 0 { self.input_dim } else { self.hidden };
            n += input * self.hidden + self.hidden;
            if self.arch == Arch::Gat {
                n += 2 * self.hidden;
            }
        }
        n += self.input_dim * self.hidden + self.hidden;
        n += 2 * self.hidden * self.hidden + self.hidden;
        n += self.hidden + 1;
        n
    }
}
