use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::collections::HashMap;

use crate::dataset::LabeledSample;
use crate::encode::TextEncoder;
use crate::gnn::model::{encode_task_text, GraphInput, PredictorModel, SampleRef};
use crate::gnn::{GnnError, PredictorConfig};
use crate::graph::WorkflowGraph;
use crate::nn::{bce_loss, AdamState, Param};
use crate::scalar::Scalar;
use crate::task::TaskInstance;

/// Pre-encoded workflows and tasks, shared by all splits.
#[derive(Debug, Clone, Default)]
pub struct EncodedDataset<T> {
    pub graphs: Vec<GraphInput<T>>,
    pub tasks: Vec<Vec<T>>,
    graph_index: HashMap<String, usize>,
    task_index: HashMap<String, usize>,
}

/// A labeled pair, by position in an [`EncodedDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub graph: usize,
    pub task: usize,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    /// Parameters from the epoch with the highest validation accuracy.
    pub model: PredictorModel<T>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochRecord>,
}

impl<T: Scalar> EncodedDataset<T> {
    pub fn new(graphs: Vec<GraphInput<T>>, tasks: Vec<Vec<T>>) -> Self {
        Self { graphs, tasks, graph_index: HashMap::new(), task_index: HashMap::new() }
    }

    pub fn encode(
        encoder: &TextEncoder,
        graphs: &[WorkflowGraph],
        tasks: &[TaskInstance],
        cfg: &PredictorConfig,
    ) -> Result<Self, GnnError> {
        if encoder.dim() != cfg.input_dim {
            return Err(GnnError::Config(format!(
                "embedding dim {} does not match input_dim {}",
                encoder.dim(),
                cfg.input_dim
            )));
        }
        let inputs = graphs.iter().map(|g| GraphInput::encode(g, encoder, cfg)).collect::<Result<_, _>>()?;
        let texts = tasks.iter().map(|t| encode_task_text(encoder, t)).collect::<Result<_, _>>()?;
        Ok(Self {
            graphs: inputs,
            tasks: texts,
            graph_index: graphs.iter().enumerate().map(|(i, g)| (g.id.clone(), i)).collect(),
            task_index: tasks.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect(),
        })
    }

    pub fn graph_position(&self, id: &str) -> Option<usize> {
        self.graph_index.get(id).copied()
    }

    pub fn task_position(&self, id: &str) -> Option<usize> {
        self.task_index.get(id).copied()
    }

    /// Resolves labeled pairs against the encoded workflows and tasks.
    pub fn samples(&self, labels: &[LabeledSample]) -> Result<Vec<TrainingSample>, GnnError> {
        labels
            .iter()
            .map(|s| {
                let graph = self.graph_position(&s.workflow).ok_or_else(|| GnnError::Shape(format!("unknown workflow {}", s.workflow)))?;
                let task = self.task_position(&s.task).ok_or_else(|| GnnError::Shape(format!("unknown task {}", s.task)))?;
                Ok(TrainingSample { graph, task, label: s.label })
            })
            .collect()
    }

    pub fn refs<'a>(&'a self, samples: &[TrainingSample]) -> Result<Vec<SampleRef<'a, T>>, GnnError> {
        samples
            .iter()
            .map(|s| {
                let graph = self.graphs.get(s.graph);
                let task = self.tasks.get(s.task);
                match (graph, task) {
                    (Some(graph), Some(task)) => Ok(SampleRef { graph, task }),
                    _ => Err(GnnError::Shape(format!("sample ({}, {}) out of range", s.graph, s.task))),
                }
            })
            .collect()
    }
}

const EVAL_CHUNK: usize = 256;

pub fn accuracy_of<T: Scalar>(
    model: &PredictorModel<T>,
    data: &EncodedDataset<T>,
    samples: &[TrainingSample],
) -> Result<f64, GnnError> {
    if samples.is_empty() {
        return Err(GnnError::EmptySplit("evaluation"));
    }
    let probs = model.predict_probabilities(&data.refs(samples)?, EVAL_CHUNK)?;
    let hits = probs.iter().zip(samples).filter(|(&p, s)| model.decide(p) == s.label).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Minibatch BCE with Adam, keeping the parameters of the best validation epoch
/// (ties favour the earlier epoch).
pub fn train<T: Scalar>(
    mut model: PredictorModel<T>,
    data: &EncodedDataset<T>,
    train_set: &[TrainingSample],
    val_set: &[TrainingSample],
) -> Result<TrainReport<T>, GnnError> {
    if train_set.is_empty() {
        return Err(GnnError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(GnnError::EmptySplit("validation"));
    }
    let cfg = model.config().clone();
    cfg.validate()?;
    // check indices up front so the loop cannot fail half-way on bad input
    data.refs(train_set)?;
    data.refs(val_set)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4521);
    let mut adam = AdamState::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_acc = f64::NEG_INFINITY;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<TrainingSample> = chunk.iter().map(|&i| train_set[i]).collect();
            let labels: Vec<bool> = batch.iter().map(|s| s.label).collect();
            let loss = loss_and_gradients(&mut model, &data.refs(&batch)?, &labels)?;
            total_loss += loss.to_f64_lossy() * batch.len() as f64;
            let mut params: Vec<&mut Param<T>> = model.params_mut().into_iter().map(|(_, p)| p).collect();
            adam.step(&mut params)?;
        }
        if !model.is_finite() {
            return Err(GnnError::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let val_accuracy = accuracy_of(&model, data, val_set)?;
        history.push(EpochRecord { epoch, loss: total_loss / train_set.len() as f64, val_accuracy });
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            best_epoch = epoch;
            best.copy_values_from(&model);
        }
        if let Some(patience) = cfg.patience {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    if history.is_empty() {
        best_acc = accuracy_of(&model, data, val_set)?;
    }
    best.zero_grad();
    Ok(TrainReport { model: best, best_epoch, best_val_accuracy: best_acc, history })
}

/// Mean BCE over `samples`, without touching gradients.
pub fn mean_loss<T: Scalar>(
    model: &PredictorModel<T>,
    data: &EncodedDataset<T>,
    samples: &[TrainingSample],
) -> Result<f64, GnnError> {
    let refs = data.refs(samples)?;
    let mut total = 0.0;
    for (chunk, labels) in refs.chunks(EVAL_CHUNK).zip(samples.chunks(EVAL_CHUNK)) {
        let fw = model.forward_batch(chunk)?;
        for (&z, s) in fw.logits.iter().zip(labels) {
            total += bce_loss(z, s.label).0.to_f64_lossy();
        }
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Mean BCE over a batch; leaves `∂loss/∂θ` in the gradient buffers.
pub fn loss_and_gradients<T: Scalar>(
    model: &mut PredictorModel<T>,
    samples: &[SampleRef<'_, T>],
    labels: &[bool],
) -> Result<T, GnnError> {
    if samples.len() != labels.len() {
        return Err(GnnError::Shape(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    if samples.is_empty() {
        return Err(GnnError::EmptySplit("batch"));
    }
    let fw = model.forward_batch(samples)?;
    let inv = T::one() / T::from_usize_lossy(samples.len());
    let mut loss = T::zero();
    let mut dlogits = Vec::with_capacity(samples.len());
    for (&z, &y) in fw.logits.iter().zip(labels) {
        let (l, d) = bce_loss(z, y);
        loss += l;
        dlogits.push(d * inv);
    }
    model.zero_grad();
    model.backward_batch(&fw, &dlogits)?;
    Ok(loss * inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-10)`; the floor keeps groups whose
    /// gradient is structurally zero from dividing rounding noise by itself.
    pub rel_error: f64,
}

/// Compares analytic gradients with central differences of step `h`, one
/// entry per parameter tensor.
pub fn gradient_check<T: Scalar>(
    model: &PredictorModel<T>,
    samples: &[SampleRef<'_, T>],
    labels: &[bool],
    h: f64,
) -> Result<Vec<GradCheck>, GnnError> {
    let mut work = model.clone();
    loss_and_gradients(&mut work, samples, labels)?;
    let analytic: Vec<(String, Vec<f64>)> = work
        .params()
        .into_iter()
        .map(|(n, p)| (n, p.grad.as_slice().iter().map(|g| g.to_f64_lossy()).collect()))
        .collect();

    let loss_at = |m: &PredictorModel<T>| -> Result<f64, GnnError> {
        let fw = m.forward_batch(samples)?;
        let total: f64 = fw.logits.iter().zip(labels).map(|(&z, &y)| bce_loss(z, y).0.to_f64_lossy()).sum();
        Ok(total / samples.len() as f64)
    };

    let mut out = Vec::with_capacity(analytic.len());
    for (group, (name, grad)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grad.len());
        for k in 0..grad.len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            nudge(&mut plus, group, k, h);
            nudge(&mut minus, group, k, -h);
            numeric.push((loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let (an, nn) = (norm(grad), norm(&numeric));
        let rel_error = norm(&diff) / (an + nn).max(1e-10);
        out.push(GradCheck { name: name.clone(), analytic_norm: an, numeric_norm: nn, rel_error });
    }
    Ok(out)
}

fn nudge<T: Scalar>(model: &mut PredictorModel<T>, group: usize, k: usize, by: f64) {
    let mut params = model.params_mut();
    let v = &mut params[group].1.value.as_mut_slice()[k];
    *v = T::from_f64_lossy(v.to_f64_lossy() + by);
}
