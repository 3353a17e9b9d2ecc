use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::generate::{
    filter_tasks, generate_tasks, generate_workflows, FilterOutcome, FilterSpec, TaskGenSpec, WorkflowGenSpec, CANONICAL_SKILL_ORDER,
    DEFAULT_PROMPTS,
};
use crate::dataset::labels::{label_dataset, split, LabeledSample, SplitSpec, Splits};
use crate::dataset::DatasetError;
use crate::dsl::to_jsonl;
use crate::executor::{Executor, SkillVocabulary};
use crate::graph::WorkflowGraph;
use crate::seed::{derive_seed, derived_rng};
use crate::task::TaskInstance;

/// Everything needed to rebuild a synthetic dataset from a root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub workflows: WorkflowGenSpec,
    pub candidates: TaskGenSpec,
    /// Number of filtered tasks kept, in generation order.
    pub tasks: usize,
    pub filter: FilterSpec,
    pub split: SplitRatios,
    pub prompts: Vec<String>,
    pub skills: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            workflows: WorkflowGenSpec::default(),
            candidates: TaskGenSpec::default(),
            tasks: 50,
            filter: FilterSpec::default(),
            split: SplitRatios::default(),
            prompts: DEFAULT_PROMPTS.iter().map(|s| s.to_string()).collect(),
            skills: CANONICAL_SKILL_ORDER.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl DatasetConfig {
    pub fn with_noise(mut self, rate: f64) -> Self {
        self.candidates.noise_rate = rate;
        self
    }

    pub fn executor(&self) -> Executor {
        Executor::new(SkillVocabulary::new(self.skills.iter().cloned()))
    }

    fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec { train: self.split.train, val: self.split.val, test: self.split.test, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltDataset {
    pub graphs: Vec<WorkflowGraph>,
    pub probes: Vec<WorkflowGraph>,
    pub candidates: usize,
    pub tasks: Vec<TaskInstance>,
    pub filter: FilterOutcome,
    pub labels: Vec<LabeledSample>,
    pub splits: Splits<LabeledSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub workflows: usize,
    pub probes: usize,
    pub candidate_tasks: usize,
    pub retained_by_filter: usize,
    pub tasks: usize,
    pub pairs_expected: usize,
    pub pairs_labeled: usize,
    pub positive_rate: f64,
    pub mean_nodes: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Generation, probe filtering, labeling and splitting, each stage drawing
/// from its own named sub-seed of `root_seed`.
pub fn build_dataset(cfg: &DatasetConfig, root_seed: u64) -> Result<BuiltDataset, DatasetError> {
    cfg.filter.validate()?;
    if cfg.tasks == 0 {
        return Err(DatasetError::Config("task count must be at least 1".into()));
    }
    let executor = cfg.executor();
    let skills: Vec<&str> = cfg.skills.iter().map(String::as_str).collect();
    let graphs = generate_workflows(&cfg.workflows, &cfg.prompts, &mut derived_rng(root_seed, "generation"))?;
    let probe_spec = WorkflowGenSpec { count: cfg.filter.probes, id_prefix: "probe".into(), ..cfg.workflows.clone() };
    let probes = generate_workflows(&probe_spec, &cfg.prompts, &mut derived_rng(root_seed, "probes"))?;
    let candidates = generate_tasks(&cfg.candidates, &skills, derive_seed(root_seed, "noise"), &mut derived_rng(root_seed, "tasks"))?;
    let filter = filter_tasks(&executor, &candidates, &probes, &cfg.filter)?;
    if filter.retained.len() < cfg.tasks {
        return Err(DatasetError::Config(format!(
            "only {} of {} candidate tasks pass the filter, {} requested",
            filter.retained.len(),
            candidates.len(),
            cfg.tasks
        )));
    }
    let tasks: Vec<TaskInstance> = filter.retained[..cfg.tasks].to_vec();
    let labels = label_dataset(&executor, &graphs, &tasks)?;
    let splits = split(&labels, &cfg.split_spec(derive_seed(root_seed, "split")))?;
    Ok(BuiltDataset { graphs, probes, candidates: candidates.len(), tasks, filter, labels, splits })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl BuiltDataset {
    pub fn summary(&self) -> DatasetSummary {
        let positives = self.labels.iter().filter(|s| s.label).count();
        let nodes: usize = self.graphs.iter().map(|g| g.node_count()).sum();
        DatasetSummary {
            workflows: self.graphs.len(),
            probes: self.probes.len(),
            candidate_tasks: self.candidates,
            retained_by_filter: self.filter.retained.len(),
            tasks: self.tasks.len(),
            pairs_expected: self.graphs.len() * self.tasks.len(),
            pairs_labeled: self.labels.len(),
            positive_rate: positives as f64 / self.labels.len().max(1) as f64,
            mean_nodes: nodes as f64 / self.graphs.len().max(1) as f64,
            train: self.splits.train.len(),
            val: self.splits.val.len(),
            test: self.splits.test.len(),
        }
    }

    /// Writes the dataset files into `dir`; returns (file name, sha256) pairs.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<(String, String)>, DatasetError> {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.to_owned(), source })?;
        let files: Vec<(&str, String)> = vec![
            ("graphs.jsonl", to_jsonl(&self.graphs)),
            ("probes.jsonl", to_jsonl(&self.probes)),
            ("tasks.jsonl", to_jsonl(&self.tasks)),
            ("filter_report.csv", self.filter.to_csv()),
            ("labels.jsonl", to_jsonl(&self.labels)),
            ("train.jsonl", to_jsonl(&self.splits.train)),
            ("val.jsonl", to_jsonl(&self.splits.val)),
            ("test.jsonl", to_jsonl(&self.splits.test)),
        ];
        let mut hashes = Vec::with_capacity(files.len());
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, &body).map_err(|source| DatasetError::Io { path, source })?;
            hashes.push((name.to_string(), sha256_hex(body.as_bytes())));
        }
        Ok(hashes)
    }
}

/// Reads a dataset directory written by [`BuiltDataset::write_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub graphs: Vec<WorkflowGraph>,
    pub tasks: Vec<TaskInstance>,
    pub splits: Splits<LabeledSample>,
}

pub fn load_dataset_dir(dir: &Path) -> Result<LoadedDataset, DatasetError> {
    let graphs = crate::dsl::load_graphs(&dir.join("graphs.jsonl"))?;
    let tasks = crate::dsl::load_tasks(&dir.join("tasks.jsonl"))?;
    let part = |name: &str| crate::dataset::labels::load_labels(&dir.join(name), &graphs, &tasks);
    let splits = Splits { train: part("train.jsonl")?, val: part("val.jsonl")?, test: part("test.jsonl")? };
    Ok(LoadedDataset { graphs, tasks, splits })
}
