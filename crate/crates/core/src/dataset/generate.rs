use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetError;
use crate::executor::Executor;
use crate::graph::{AgentNode, NodeId, WorkflowGraph};
use crate::task::{SyntheticEvalSpec, TaskInstance};

/// Role prompts used for generated agents. Most carry one skill keyword, two
/// carry a pair, and two are helpers with none.
pub const DEFAULT_PROMPTS: [&str; 12] = [
    "Planner: plan the overall approach before anyone acts.",
    "Programmer: write clean code for the assignment.",
    "Reviewer: review the draft carefully and point out issues.",
    "Tester: test the candidate against edge cases.",
    "Debugger: fix any bugs reported upstream.",
    "Mathematician: solve the problem step by step.",
    "Checker: verify every claim in the answer.",
    "Aggregator: aggregate the previous answers into one.",
    "Engineer: plan and code the solution end to end.",
    "QA lead: test the build, then fix the failures.",
    "Assistant: restate the question clearly.",
    "Summarizer: summarize the discussion so far.",
];

/// Order in which required skills appear in generated tasks. Keeping one
/// canonical order means a task's bag of words determines its sequence.
pub const CANONICAL_SKILL_ORDER: [&str; 8] = ["plan", "solve", "code", "test", "fix", "review", "verify", "aggregate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowGenSpec {
    pub count: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Probability of each extra forward edge beyond the spanning parent.
    pub edge_prob: f64,
    pub id_prefix: String,
}

impl Default for WorkflowGenSpec {
    fn default() -> Self {
        Self { count: 200, min_nodes: 3, max_nodes: 9, edge_prob: 0.2, id_prefix: "wf".into() }
    }
}

impl WorkflowGenSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes || self.max_nodes > 12 {
            return Err(DatasetError::Config(format!(
                "node range [{}, {}] must lie within [1, 12]",
                self.min_nodes, self.max_nodes
            )));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(DatasetError::Config(format!("edge_prob {} outside [0, 1]", self.edge_prob)));
        }
        Ok(())
    }
}

/// Random DAGs: node count uniform in range, a random topological order,
/// one parent edge per non-first node (keeps the workflow connected) and
/// extra forward edges with probability `edge_prob`.
pub fn generate_workflows<R: Rng>(spec: &WorkflowGenSpec, prompts: &[String], rng: &mut R) -> Result<Vec<WorkflowGraph>, DatasetError> {
    spec.validate()?;
    if prompts.is_empty() {
        return Err(DatasetError::Config("prompt vocabulary is empty".into()));
    }
    let width = spec.count.to_string().len().max(3);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
        let nodes: Vec<AgentNode> = (1..=n as u32).map(|id| AgentNode::new(id, prompts[rng.gen_range(0..prompts.len())].clone())).collect();
        let mut order: Vec<u32> = (1..=n as u32).collect();
        order.shuffle(rng);
        let mut edges = Vec::new();
        for k in 1..n {
            let parent = rng.gen_range(0..k);
            for j in 0..k {
                if j == parent || rng.gen_bool(spec.edge_prob) {
                    edges.push((NodeId(order[j]), NodeId(order[k])));
                }
            }
        }
        edges.sort();
        out.push(WorkflowGraph::new(format!("{}-{:0width$}", spec.id_prefix, i + 1), nodes, edges));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskGenSpec {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Node budget written into every generated criterion.
    pub max_nodes: usize,
    pub noise_rate: f64,
    pub id_prefix: String,
}

impl Default for TaskGenSpec {
    fn default() -> Self {
        Self { count: 400, min_len: 1, max_len: 3, max_nodes: 10, noise_rate: 0.0, id_prefix: "task".into() }
    }
}

const OPENERS: [&str; 6] = ["Please", "Your job is to", "We need you to", "Kindly", "The goal is to", "Help us"];
const TOPICS: [&str; 12] = [
    "a sorting routine",
    "an interval scheduler",
    "a prime sieve",
    "a matrix puzzle",
    "a string parser",
    "a budget forecast",
    "a geometry question",
    "a graph traversal",
    "an inventory ledger",
    "a calendar converter",
    "a probability riddle",
    "a text classifier",
];

/// Tasks requiring `min_len..=max_len` distinct skills in canonical order;
/// the text names those skills plus a random topic.
pub fn generate_tasks<R: Rng>(spec: &TaskGenSpec, skills: &[&str], noise_seed: u64, rng: &mut R) -> Result<Vec<TaskInstance>, DatasetError> {
    if spec.min_len == 0 || spec.min_len > spec.max_len || spec.max_len > skills.len() {
        return Err(DatasetError::Config(format!(
            "sequence length range [{}, {}] invalid for {} skills",
            spec.min_len,
            spec.max_len,
            skills.len()
        )));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(DatasetError::Config(format!("noise rate {} outside [0, 1]", spec.noise_rate)));
    }
    let width = spec.count.to_string().len().max(4);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, skills.len(), len).into_vec();
        picked.sort_unstable();
        let seq: Vec<String> = picked.iter().map(|&k| skills[k].to_string()).collect();
        let verbs = match seq.len() {
            1 => seq[0].clone(),
            _ => format!("{}, then {}", seq[..seq.len() - 1].join(", then "), seq[seq.len() - 1]),
        };
        let text = format!(
            "{} {} for {}.",
            OPENERS[rng.gen_range(0..OPENERS.len())],
            verbs,
            TOPICS[rng.gen_range(0..TOPICS.len())]
        );
        let eval = SyntheticEvalSpec { required_sequence: seq, max_nodes: spec.max_nodes, noise_rate: spec.noise_rate, noise_seed };
        out.push(TaskInstance::synthetic(format!("{}-{:0width$}", spec.id_prefix, i + 1), text, eval));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low: f64,
    pub high: f64,
    /// Size of the probe workflow subset.
    pub probes: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self::preset("humaneval").expect("known preset")
    }
}

impl FilterSpec {
    /// Success-rate bands and probe counts used for the public benchmarks.
    pub fn preset(name: &str) -> Option<Self> {
        let (low, high, probes) = match name {
            "humaneval" => (0.1, 0.9, 26),
            "mbpp" => (0.2, 0.8, 30),
            "math" => (0.2, 0.8, 150),
            "gsm8k" => (0.3, 0.9, 42),
            "mmlu" => (0.25, 0.75, 20),
            _ => return None,
        };
        Some(Self { low, high, probes })
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(0.0 <= self.low && self.low < self.high && self.high <= 1.0) {
            return Err(DatasetError::Config(format!("filter bounds [{}, {}] need 0 <= low < high <= 1", self.low, self.high)));
        }
        Ok(())
    }

    pub fn admits(&self, rate: f64) -> bool {
        self.low <= rate && rate <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRate {
    pub task: String,
    pub successes: usize,
    pub probes: usize,
    pub rate: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub retained: Vec<TaskInstance>,
    pub rates: Vec<TaskRate>,
}

impl FilterOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,successes,probes,rate,retained\n");
        for r in &self.rates {
            s.push_str(&format!("{},{},{},{},{}\n", r.task, r.successes, r.probes, r.rate, u8::from(r.retained)));
        }
        s
    }
}

/// Keeps tasks whose success rate over `probes` lies within the inclusive band.
pub fn filter_tasks(executor: &Executor, tasks: &[TaskInstance], probes: &[WorkflowGraph], spec: &FilterSpec) -> Result<FilterOutcome, DatasetError> {
    spec.validate()?;
    if probes.is_empty() {
        return Err(DatasetError::EmptyProbeSet);
    }
    let mut retained = Vec::new();
    let mut rates = Vec::with_capacity(tasks.len());
    for t in tasks {
        let mut successes = 0;
        for g in probes {
            successes += usize::from(executor.execute_workflow(g, t)?);
        }
        let rate = successes as f64 / probes.len() as f64;
        let keep = spec.admits(rate);
        if keep {
            retained.push(t.clone());
        }
        rates.push(TaskRate { task: t.id.clone(), successes, probes: probes.len(), rate, retained: keep });
    }
    Ok(FilterOutcome { retained, rates })
}
