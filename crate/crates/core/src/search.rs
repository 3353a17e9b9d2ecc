//! Workflow search by mutation and elitist beam selection, scored by a
//! trained predictor, the executor, or seeded random rewards.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::TextEncoder;
use crate::executor::{ExecError, Executor};
use crate::gnn::{encode_task_text, GnnError, GraphInput, PredictorModel, SampleRef};
use crate::graph::{AgentNode, NodeId, WorkflowGraph};
use crate::seed::derive_seed;
use crate::task::TaskInstance;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no mutation applies to workflow {0}")]
    NoApplicableMove(String),
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Gnn,
    GroundTruth,
    Random,
}

impl std::str::FromStr for RewardKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gnn" => Ok(RewardKind::Gnn),
            "ground_truth" => Ok(RewardKind::GroundTruth),
            "random" => Ok(RewardKind::Random),
            other => Err(format!("unknown reward {other:?} (expected gnn, ground_truth or random)")),
        }
    }
}

impl std::fmt::Display for RewardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RewardKind::Gnn => "gnn",
            RewardKind::GroundTruth => "ground_truth",
            RewardKind::Random => "random",
        })
    }
}

/// Scorer used while searching.
#[derive(Clone, Copy)]
pub enum RewardSource<'a> {
    /// Mean predicted success probability over the train tasks.
    Gnn { model: &'a PredictorModel<f64>, encoder: &'a TextEncoder },
    /// Executor success rate over the train tasks.
    GroundTruth,
    /// One seeded uniform draw per candidate.
    Random { seed: u64 },
}

impl RewardSource<'_> {
    pub fn kind(&self) -> RewardKind {
        match self {
            RewardSource::Gnn { .. } => RewardKind::Gnn,
            RewardSource::GroundTruth => RewardKind::GroundTruth,
            RewardSource::Random { .. } => RewardKind::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Candidate evaluations allowed.
    pub budget: usize,
    pub beam: usize,
    /// Mutations generated per beam member and step.
    pub children: usize,
    pub seed: u64,
    /// Add-node moves are disabled once a workflow reaches this size.
    pub max_nodes: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { budget: 50, beam: 1, children: 4, seed: 0, max_nodes: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    AddNode,
    DeleteNode,
    AddEdge,
    RemoveEdge,
    ReplacePrompt,
}

fn applicable_moves(g: &WorkflowGraph, prompts: &[String], max_nodes: usize) -> Vec<Move> {
    let mut moves = Vec::new();
    if !prompts.is_empty() && g.node_count() < max_nodes {
        moves.push(Move::AddNode);
    }
    if !deletable(g).is_empty() {
        moves.push(Move::DeleteNode);
    }
    if !addable_edges(g).is_empty() {
        moves.push(Move::AddEdge);
    }
    if !g.edges.is_empty() {
        moves.push(Move::RemoveEdge);
    }
    if g.nodes.iter().any(|n| prompts.iter().any(|p| *p != n.prompt)) {
        moves.push(Move::ReplacePrompt);
    }
    moves
}

fn deletable(g: &WorkflowGraph) -> Vec<NodeId> {
    if g.node_count() < 2 {
        return Vec::new();
    }
    let base = g.component_count();
    g.node_ids().into_iter().filter(|&v| g.without_node(v).component_count() <= base).collect()
}

fn addable_edges(g: &WorkflowGraph) -> Vec<(NodeId, NodeId)> {
    let ids = g.node_ids();
    let mut out = Vec::new();
    for &u in &ids {
        for &v in &ids {
            if u != v && !g.contains_edge(u, v) && !g.reaches(v, u) {
                out.push((u, v));
            }
        }
    }
    out
}

/// Applies one move chosen uniformly among those applicable; the result is a
/// valid DAG whenever the input is.
pub fn mutate<R: Rng>(g: &WorkflowGraph, prompts: &[String], max_nodes: usize, rng: &mut R) -> Result<(WorkflowGraph, Move), SearchError> {
    let moves = applicable_moves(g, prompts, max_nodes);
    if moves.is_empty() {
        return Err(SearchError::NoApplicableMove(g.id.clone()));
    }
    let mv = moves[rng.gen_range(0..moves.len())];
    let mut out = g.clone();
    match mv {
        Move::AddNode => {
            let id = NodeId(g.max_node_id().map_or(1, |m| m.0 + 1));
            out.nodes.push(AgentNode::new(id, prompts[rng.gen_range(0..prompts.len())].clone()));
            if !g.nodes.is_empty() {
                let parent = g.nodes[rng.gen_range(0..g.nodes.len())].id;
                out.edges.push((parent, id));
            }
        }
        Move::DeleteNode => {
            let c = deletable(g);
            out = g.without_node(c[rng.gen_range(0..c.len())]);
        }
        Move::AddEdge => {
            let c = addable_edges(g);
            out.edges.push(c[rng.gen_range(0..c.len())]);
        }
        Move::RemoveEdge => {
            out.edges.remove(rng.gen_range(0..g.edges.len()));
        }
        Move::ReplacePrompt => {
            let nodes: Vec<usize> = (0..g.nodes.len()).filter(|&i| prompts.iter().any(|p| *p != g.nodes[i].prompt)).collect();
            let i = nodes[rng.gen_range(0..nodes.len())];
            let others: Vec<&String> = prompts.iter().filter(|p| **p != g.nodes[i].prompt).collect();
            out.nodes[i].prompt = others[rng.gen_range(0..others.len())].clone();
        }
    }
    out.edges.sort();
    Ok((out, mv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub evaluations: usize,
    pub executor_calls: usize,
    pub predictor_calls: usize,
    pub best_reward: f64,
    pub best_test_score: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("step,evaluations,executor_calls,predictor_calls,best_reward,best_test_score\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.evaluations, r.executor_calls, r.predictor_calls, r.best_reward, r.best_test_score
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub reward: RewardKind,
    pub best: WorkflowGraph,
    pub best_reward: f64,
    /// Executor success rate of `best` on the test tasks.
    pub score: f64,
    pub evaluations: usize,
    /// Executor and predictor calls made while searching; test-time scoring
    /// is not counted.
    pub executor_calls: usize,
    pub predictor_calls: usize,
    pub wall_time_ms: u128,
    pub trace: Vec<TraceRow>,
}

struct Scorer<'a> {
    source: RewardSource<'a>,
    executor: &'a Executor,
    train: &'a [TaskInstance],
    task_vecs: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    executor_calls: usize,
    predictor_calls: usize,
}

impl Scorer<'_> {
    fn score(&mut self, candidates: &[WorkflowGraph]) -> Result<Vec<f64>, SearchError> {
        let m = self.train.len();
        match self.source {
            RewardSource::GroundTruth => {
                let ex = self.executor;
                let train = self.train;
                let r: Result<Vec<f64>, ExecError> = candidates.par_iter().map(|g| ex.success_rate(g, train)).collect();
                self.executor_calls += candidates.len() * m;
                Ok(r?)
            }
            RewardSource::Gnn { model, encoder } => {
                let vecs = &self.task_vecs;
                let r: Result<Vec<f64>, GnnError> = candidates
                    .par_iter()
                    .map(|g| {
                        let input = GraphInput::encode(g, encoder, model.config())?;
                        let refs: Vec<SampleRef<'_, f64>> = vecs.iter().map(|t| SampleRef { graph: &input, task: t }).collect();
                        let p = model.predict_probabilities(&refs, refs.len())?;
                        Ok(p.iter().sum::<f64>() / p.len() as f64)
                    })
                    .collect();
                self.predictor_calls += candidates.len() * m;
                Ok(r?)
            }
            RewardSource::Random { .. } => Ok(candidates.iter().map(|_| self.rng.gen::<f64>()).collect()),
        }
    }
}

/// Elitist beam search from `seed_graph`: each step mutates every beam member
/// `children` times, scores only the new candidates, and keeps the best
/// `beam` of old and new. The seed itself is never scored. The returned
/// workflow is the best-rewarded candidate seen, scored on `test` by the
/// executor.
pub fn optimize(
    seed_graph: &WorkflowGraph,
    reward: RewardSource<'_>,
    config: &SearchConfig,
    executor: &Executor,
    prompts: &[String],
    train: &[TaskInstance],
    test: &[TaskInstance],
) -> Result<SearchReport, SearchError> {
    let start = Instant::now();
    if config.budget == 0 || config.beam == 0 || config.children == 0 {
        return Err(SearchError::Config("budget, beam and children must be at least 1".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(SearchError::Config("train and test task sets must be non-empty".into()));
    }
    let train_ids: BTreeSet<&str> = train.iter().map(|t| t.id.as_str()).collect();
    if let Some(t) = test.iter().find(|t| train_ids.contains(t.id.as_str())) {
        return Err(SearchError::Config(format!("task {} is in both train and test sets", t.id)));
    }
    let report = seed_graph.validate();
    if !report.is_valid() {
        return Err(SearchError::Config(format!("seed workflow {}: {report}", seed_graph.id)));
    }
    let task_vecs = match reward {
        RewardSource::Gnn { model, encoder } => {
            model.check_encoder(encoder)?;
            train.iter().map(|t| encode_task_text(encoder, t)).collect::<Result<_, _>>()?
        }
        _ => Vec::new(),
    };
    let random_seed = match reward {
        RewardSource::Random { seed } => seed,
        _ => 0,
    };
    let mut scorer = Scorer {
        source: reward,
        executor,
        train,
        task_vecs,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(random_seed, "random-reward")),
        executor_calls: 0,
        predictor_calls: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "search"));

    let mut beam: Vec<(WorkflowGraph, f64)> = vec![(seed_graph.clone(), f64::NEG_INFINITY)];
    let mut best: Option<(WorkflowGraph, f64)> = None;
    let mut evaluations = 0;
    let mut trace = Vec::new();
    let mut step = 0;
    while evaluations < config.budget {
        step += 1;
        let mut children = Vec::new();
        'outer: for (parent, _) in &beam {
            for _ in 0..config.children {
                if evaluations + children.len() >= config.budget {
                    break 'outer;
                }
                let (mut child, _) = mutate(parent, prompts, config.max_nodes, &mut rng)?;
                child.id = format!("{}-s{step}c{}", seed_graph.id, children.len() + 1);
                children.push(child);
            }
        }
        let scores = scorer.score(&children)?;
        evaluations += children.len();
        let mut pool: Vec<(WorkflowGraph, f64)> = beam.into_iter().chain(children.into_iter().zip(scores)).collect();
        // stable sort keeps incumbents ahead of equally scored newcomers
        pool.sort_by(|a, b| b.1.total_cmp(&a.1));
        pool.truncate(config.beam);
        beam = pool;
        if best.as_ref().is_none_or(|b| beam[0].1 > b.1) {
            best = Some(beam[0].clone());
        }
        let (g, r) = best.as_ref().expect("at least one candidate scored");
        trace.push(TraceRow {
            step,
            evaluations,
            executor_calls: scorer.executor_calls,
            predictor_calls: scorer.predictor_calls,
            best_reward: *r,
            best_test_score: executor.success_rate(g, test)?,
        });
    }
    let (best, best_reward) = best.expect("budget is at least one");
    let score = executor.success_rate(&best, test)?;
    Ok(SearchReport {
        reward: reward.kind(),
        best,
        best_reward,
        score,
        evaluations,
        executor_calls: scorer.executor_calls,
        predictor_calls: scorer.predictor_calls,
        wall_time_ms: start.elapsed().as_millis(),
        trace,
    })
}

/// The workflow searches start from: one agent with no skills.
pub fn default_seed_graph() -> WorkflowGraph {
    WorkflowGraph::from_parts("seed", &[(1, "Assistant: restate the question clearly.")], &[])
}
