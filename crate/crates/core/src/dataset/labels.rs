use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::DatasetError;
use crate::executor::Executor;
use crate::graph::WorkflowGraph;
use crate::task::TaskInstance;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledSample {
    pub workflow: String,
    pub task: String,
    #[serde(serialize_with = "label_out", deserialize_with = "label_in")]
    pub label: bool,
}

fn label_out<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn label_in<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    match u8::deserialize(d)? {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(serde::de::Error::custom(format!("label must be 0 or 1, got {other}"))),
    }
}

/// One sample per (graph, task) pair, graph-major.
pub fn label_dataset(executor: &Executor, graphs: &[WorkflowGraph], tasks: &[TaskInstance]) -> Result<Vec<LabeledSample>, DatasetError> {
    let rows: Result<Vec<Vec<LabeledSample>>, DatasetError> = graphs
        .par_iter()
        .map(|g| {
            tasks
                .iter()
                .map(|t| {
                    Ok(LabeledSample { workflow: g.id.clone(), task: t.id.clone(), label: executor.execute_workflow(g, t)? })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Parses `{"workflow", "task", "label"}` lines and resolves ids against the
/// known workflows and tasks.
pub fn parse_labels(text: &str, workflows: &HashSet<&str>, tasks: &HashSet<&str>) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut out = Vec::new();
    for (line, s) in crate::dsl::read_jsonl::<LabeledSample>(text)? {
        if !workflows.contains(s.workflow.as_str()) {
            return Err(DatasetError::UnresolvedId { line, id: s.workflow });
        }
        if !tasks.contains(s.task.as_str()) {
            return Err(DatasetError::UnresolvedId { line, id: s.task });
        }
        out.push(s);
    }
    Ok(out)
}

pub fn load_labels(path: &Path, graphs: &[WorkflowGraph], tasks: &[TaskInstance]) -> Result<Vec<LabeledSample>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_owned(), source })?;
    let w: HashSet<&str> = graphs.iter().map(|g| g.id.as_str()).collect();
    let t: HashSet<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
    parse_labels(&text, &w, &t)
}

/// Collapses repeated runs of the same pair into one majority label; a tie
/// counts as failure. Output is sorted by (workflow, task).
pub fn reduce_majority(samples: &[LabeledSample]) -> Vec<LabeledSample> {
    let mut votes: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for s in samples {
        let e = votes.entry((&s.workflow, &s.task)).or_default();
        if s.label {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    votes
        .into_iter()
        .map(|((w, t), (yes, no))| LabeledSample { workflow: w.to_owned(), task: t.to_owned(), label: yes > no })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|&x| !(x > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Config(format!("split ratios {r:?} must be positive and sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits<S> {
    pub train: Vec<S>,
    pub val: Vec<S>,
    pub test: Vec<S>,
}

pub const MIN_SPLIT_SAMPLES: usize = 10;

/// Seeded sample-level shuffle; validation and test sizes are floored and the
/// remainder goes to training.
pub fn split<S: Clone>(samples: &[S], spec: &SplitSpec) -> Result<Splits<S>, DatasetError> {
    spec.validate()?;
    let n = samples.len();
    if n < MIN_SPLIT_SAMPLES {
        return Err(DatasetError::TooFewSamples { found: n, needed: MIN_SPLIT_SAMPLES });
    }
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let (n_val, n_test) = (floor(spec.val), floor(spec.test));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let take = |range: &[usize]| range.iter().map(|&i| samples[i].clone()).collect::<Vec<S>>();
    let n_train = n - n_val - n_test;
    Ok(Splits {
        train: take(&idx[..n_train]),
        val: take(&idx[n_train..n_train + n_val]),
        test: take(&idx[n_train + n_val..]),
    })
}
