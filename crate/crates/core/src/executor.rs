//! Deterministic stand-in for LLM-driven workflow execution.
//!
//! Each agent's capabilities are the prompt tokens that belong to a fixed
//! skill vocabulary. A workflow solves a task iff some directed path visits
//! agents whose skills cover the task's required sequence in order, and the
//! workflow stays within the task's node budget. An optional pair-keyed hash
//! flips the label with probability `noise_rate`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::encode::{fnv1a64, tokenize};
use crate::graph::{GraphError, WorkflowGraph};
use crate::task::{SyntheticEvalSpec, TaskInstance};

pub const DEFAULT_SKILLS: [&str; 8] = ["plan", "code", "review", "test", "fix", "solve", "verify", "aggregate"];

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("task {0} has no synthetic evaluation spec")]
    UnsupportedEval(String),
    #[error("task {task}: {message}")]
    InvalidSpec { task: String, message: String },
    #[error("empty task set")]
    EmptyTaskSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillVocabulary {
    skills: BTreeSet<String>,
}

impl Default for SkillVocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_SKILLS)
    }
}

impl SkillVocabulary {
    pub fn new<S: Into<String>>(skills: impl IntoIterator<Item = S>) -> Self {
        Self { skills: skills.into_iter().map(|s| s.into().to_lowercase()).collect() }
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.skills.contains(tag)
    }

    /// Skill tags of one agent prompt.
    pub fn tags(&self, prompt: &str) -> AgentSkill {
        AgentSkill { tags: tokenize(prompt).into_iter().filter(|t| self.skills.contains(t)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgentSkill {
    pub tags: BTreeSet<String>,
}

/// Executes workflows against synthetic criteria.
#[derive(Debug, Clone, Default)]
pub struct Executor {
    pub vocabulary: SkillVocabulary,
}

impl Executor {
    pub fn new(vocabulary: SkillVocabulary) -> Self {
        Self { vocabulary }
    }

    pub fn spec_of<'a>(&self, task: &'a TaskInstance) -> Result<&'a SyntheticEvalSpec, ExecError> {
        let spec = task.eval_spec.as_synthetic().ok_or_else(|| ExecError::UnsupportedEval(task.id.clone()))?;
        let invalid = |message: String| ExecError::InvalidSpec { task: task.id.clone(), message };
        if spec.required_sequence.is_empty() {
            return Err(invalid("required sequence is empty".into()));
        }
        if let Some(t) = spec.required_sequence.iter().find(|t| !self.vocabulary.contains(t)) {
            return Err(invalid(format!("tag {t:?} is not in the skill vocabulary")));
        }
        if !(0.0..=1.0).contains(&spec.noise_rate) {
            return Err(invalid(format!("noise rate {} outside [0,1]", spec.noise_rate)));
        }
        Ok(spec)
    }

    /// Noise-free outcome: path-subsequence rule plus node budget.
    pub fn clean_outcome(&self, graph: &WorkflowGraph, spec: &SyntheticEvalSpec) -> Result<bool, ExecError> {
        let order = graph.topo_order()?;
        if graph.node_count() > spec.max_nodes {
            return Ok(false);
        }
        let idx = graph.index_map();
        let preds = graph.in_adjacency();
        let tags: Vec<AgentSkill> = graph.nodes.iter().map(|n| self.vocabulary.tags(&n.prompt)).collect();
        let need = &spec.required_sequence;
        // matched[v]: longest prefix of `need` covered by some path ending at v.
        // A longer matched prefix dominates a shorter one, so the max suffices.
        let mut matched = vec![0usize; graph.node_count()];
        for id in order {
            let v = idx[&id];
            let mut k = preds[v].iter().map(|&u| matched[u]).max().unwrap_or(0);
            while k < need.len() && tags[v].tags.contains(&need[k]) {
                k += 1;
            }
            if k == need.len() {
                return Ok(true);
            }
            matched[v] = k;
        }
        Ok(false)
    }

    pub fn execute_workflow(&self, graph: &WorkflowGraph, task: &TaskInstance) -> Result<bool, ExecError> {
        let spec = self.spec_of(task)?;
        let clean = self.clean_outcome(graph, spec)?;
        Ok(clean ^ noise_flip(&graph.id, &task.id, spec))
    }

    pub fn success_rate(&self, graph: &WorkflowGraph, tasks: &[TaskInstance]) -> Result<f64, ExecError> {
        if tasks.is_empty() {
            return Err(ExecError::EmptyTaskSet);
        }
        let mut hits = 0usize;
        for t in tasks {
            hits += usize::from(self.execute_workflow(graph, t)?);
        }
        Ok(hits as f64 / tasks.len() as f64)
    }
}

/// Uniform draw in [0, 1) keyed by (graph id, task id, seed).
pub fn pair_uniform(graph_id: &str, task_id: &str, seed: u64) -> f64 {
    let mut key = Vec::with_capacity(graph_id.len() + task_id.len() + 1);
    key.extend_from_slice(graph_id.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(task_id.as_bytes());
    let mut z = fnv1a64(seed, &key);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn noise_flip(graph_id: &str, task_id: &str, spec: &SyntheticEvalSpec) -> bool {
    spec.noise_rate > 0.0 && pair_uniform(graph_id, task_id, spec.noise_seed) < spec.noise_rate
}
