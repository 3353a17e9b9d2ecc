//! The `flowgnn` command line: `extract`, `build`, `train`, `eval`,
//! `optimize` and `report`.
//!
//! Every artifact-producing command writes one `manifest.json` next to its
//! outputs with the effective config, the seeds, and a sha256 per output.
//! Only the `timings` field of a manifest varies between identical runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_dataset, load_dataset_dir, sha256_hex, DatasetConfig, DatasetError, LoadedDataset};
use crate::dsl::{extract_graph, parse_graphs, parse_script, to_jsonl, DslError};
use crate::encode::{EmbeddingConfig, EncodeError, TextEncoder};
use crate::executor::ExecError;
use crate::gnn::{accuracy_of, train, Arch, EncodedDataset, GnnError, PredictorConfig, PredictorModel};
use crate::metrics::{
    accuracy, bar_chart_svg, default_k, line_chart_svg, metrics_csv, parse_metrics_csv, success_by_node_count, utility_at_k, MetricRow,
    MetricsError, Outcome, Series,
};
use crate::nn::{Checkpoint, NnError};
use crate::scalar::Scalar;
use crate::search::{default_seed_graph, optimize, trace_csv, RewardKind, RewardSource, SearchConfig, SearchError};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Data(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// `error[<kind>]: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let msg: String = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.kind())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_owned(), message: e.to_string() }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Config(_) => CliError::Config(e.to_string()),
            DatasetError::Io { path, source } => io_err(&path, source),
            DatasetError::Exec(x) => x.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DslError> for CliError {
    fn from(e: DslError) -> Self {
        match e {
            DslError::Io { path, source } => io_err(&path, source),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EncodeError> for CliError {
    fn from(e: EncodeError) -> Self {
        match e {
            EncodeError::Config(_) => CliError::Config(e.to_string()),
            EncodeError::Io { path, source } => io_err(&path, source),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GnnError> for CliError {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::Config(_) => CliError::Config(e.to_string()),
            GnnError::NonFinite(_) => CliError::Numeric(e.to_string()),
            GnnError::Nn(x) => x.into(),
            GnnError::Encode(x) => x.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(_) => CliError::Config(e.to_string()),
            SearchError::Exec(x) => x.into(),
            SearchError::Gnn(x) => x.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// How many dataset tasks the search scores on, and how many it reports on.
/// Train tasks are taken from the front of the task list, test tasks right
/// after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchTasks {
    pub train: usize,
    pub test: usize,
}

impl Default for SearchTasks {
    fn default() -> Self {
        Self { train: 20, test: 20 }
    }
}

/// Contents of a `--config` JSON file. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub embedding: EmbeddingConfig,
    /// `model.seed` is replaced by a sub-seed of the root seed.
    pub model: PredictorConfig,
    pub precision: Precision,
    pub search: SearchConfig,
    pub search_tasks: SearchTasks,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The named sub-seeds every command derives from the root seed.
    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        m.insert("root".to_string(), self.seed);
        m.insert("init".to_string(), derive_seed(self.seed, "init"));
        m.insert("search".to_string(), derive_seed(self.seed, "search"));
        m
    }

    fn model_config(&self) -> Result<PredictorConfig, CliError> {
        let mut cfg = self.model.clone();
        cfg.seed = derive_seed(self.seed, "init");
        if cfg.input_dim != self.embedding.dim {
            return Err(CliError::Config(format!(
                "model.input_dim = {} but embedding.dim = {}",
                cfg.input_dim, self.embedding.dim
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "flowgnn", version, about = "Workflow success prediction and predictor-guided workflow search")]
pub struct Cli {
    /// Worker threads for labeling, evaluation and candidate scoring.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a workflow script, or a graph JSON/JSONL file, into a graphs file.
    Extract {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Graph id for script input; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Generate, filter, label and split a synthetic dataset.
    Build {
        #[command(flatten)]
        common: Common,
    },
    /// Train a predictor on a dataset directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        arch: Option<Arch>,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Search for a better workflow using one reward source.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Required for `--reward gnn`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "gnn")]
        reward: RewardKind,
    },
    /// Merge metric and trace CSVs into one table plus SVG charts.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<Artifact>,
    #[serde(default)]
    pub summary: serde_json::Value,
    /// Wall-clock milliseconds per phase; excluded from reproducibility checks.
    pub timings: BTreeMap<String, u128>,
}

struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_owned(), artifacts: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn to_value<S: Serialize>(s: &S) -> serde_json::Value {
    serde_json::to_value(s).expect("value serializes")
}

fn ms(t: Instant) -> u128 {
    t.elapsed().as_millis()
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.one_line());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    // a second call in the same process keeps the first pool, which is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    match cli.command {
        Command::Extract { input, out, id } => cmd_extract(&input, &out, id.as_deref()),
        Command::Build { common } => cmd_build(&common.resolve()?, &common.out),
        Command::Train { common, data, arch } => {
            let mut cfg = common.resolve()?;
            if let Some(a) = arch {
                cfg.model.arch = a;
            }
            cmd_train(&cfg, &data, &common.out)
        }
        Command::Eval { common, data, checkpoint, k } => {
            let mut cfg = common.resolve()?;
            if k.is_some() {
                cfg.k = k;
            }
            cmd_eval(&cfg, &checkpoint, &data, &common.out)
        }
        Command::Optimize { common, data, checkpoint, reward } => {
            cmd_optimize(&common.resolve()?, checkpoint.as_deref(), reward, &data, &common.out)
        }
        Command::Report { inputs, out } => cmd_report(&inputs, &out),
    }
}

pub fn cmd_extract(input: &Path, out: &Path, id: Option<&str>) -> Result<(), CliError> {
    let t0 = Instant::now();
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let is_json = matches!(input.extension().and_then(|e| e.to_str()), Some("json" | "jsonl"));
    let graphs = if is_json {
        parse_graphs(&text)?
    } else {
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("workflow");
        vec![extract_graph(&parse_script(&text)?, id.unwrap_or(stem))]
    };
    for g in &graphs {
        let report = g.validate();
        if !report.is_valid() {
            return Err(CliError::Data(format!("graph {}: {report}", g.id)));
        }
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let body = to_jsonl(&graphs);
    fs::write(out, &body).map_err(|e| io_err(out, e))?;
    let manifest = RunManifest {
        command: "extract".into(),
        config: serde_json::json!({ "id": id }),
        seeds: BTreeMap::new(),
        inputs: vec![input.display().to_string()],
        outputs: vec![Artifact { path: out.display().to_string(), sha256: sha256_hex(body.as_bytes()) }],
        summary: serde_json::json!({ "graphs": graphs.len() }),
        timings: BTreeMap::from([("total_ms".to_string(), ms(t0))]),
    };
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    write_manifest(Path::new(&name), &manifest)
}

pub fn cmd_build(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let ds = build_dataset(&cfg.dataset, cfg.seed)?;
    let built = ms(t0);
    let hashes = ds.write_to(out)?;
    let manifest = RunManifest {
        command: "build".into(),
        config: to_value(cfg),
        seeds: cfg.seeds(),
        inputs: Vec::new(),
        outputs: hashes.into_iter().map(|(path, sha256)| Artifact { path, sha256 }).collect(),
        summary: to_value(&ds.summary()),
        timings: BTreeMap::from([("build_ms".to_string(), built), ("total_ms".to_string(), ms(t0))]),
    };
    write_manifest(&out.join("manifest.json"), &manifest)
}

pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let ds = load_dataset_dir(data)?;
    let encoder = TextEncoder::new(cfg.embedding.clone())?;
    let model_cfg = cfg.model_config()?;
    let trained = match cfg.precision {
        Precision::F32 => train_as::<f32>(&ds, &encoder, model_cfg)?,
        Precision::F64 => train_as::<f64>(&ds, &encoder, model_cfg)?,
    };
    let mut outputs = Outputs::new(out)?;
    outputs.write("model.ckpt", &trained.checkpoint.to_bytes())?;
    let mut history = String::from("epoch,loss,val_accuracy\n");
    for (epoch, loss, val) in &trained.history {
        history.push_str(&format!("{epoch},{loss},{val}\n"));
    }
    outputs.write("history.csv", history.as_bytes())?;
    let manifest = RunManifest {
        command: "train".into(),
        config: to_value(cfg),
        seeds: cfg.seeds(),
        inputs: vec![data.display().to_string()],
        outputs: outputs.artifacts,
        summary: serde_json::json!({
            "best_epoch": trained.best_epoch,
            "best_val_accuracy": trained.best_val,
            "test_accuracy": trained.test_accuracy,
            "parameters": trained.parameters,
        }),
        timings: BTreeMap::from([("train_ms".to_string(), trained.train_ms), ("total_ms".to_string(), ms(t0))]),
    };
    write_manifest(&out.join("manifest.json"), &manifest)
}

struct Trained {
    checkpoint: Checkpoint,
    history: Vec<(usize, f64, f64)>,
    best_epoch: usize,
    best_val: f64,
    test_accuracy: f64,
    parameters: usize,
    train_ms: u128,
}

fn train_as<T: Scalar>(ds: &LoadedDataset, encoder: &TextEncoder, cfg: PredictorConfig) -> Result<Trained, CliError> {
    let data = EncodedDataset::<T>::encode(encoder, &ds.graphs, &ds.tasks, &cfg)?;
    let train_set = data.samples(&ds.splits.train)?;
    let val_set = data.samples(&ds.splits.val)?;
    let test_set = data.samples(&ds.splits.test)?;
    let model = PredictorModel::<T>::new(cfg)?;
    let parameters = model.parameter_count();
    let t = Instant::now();
    let report = train(model, &data, &train_set, &val_set)?;
    let train_ms = ms(t);
    let test_accuracy = if test_set.is_empty() { f64::NAN } else { accuracy_of(&report.model, &data, &test_set)? };
    Ok(Trained {
        checkpoint: report.model.to_checkpoint(),
        history: report.history.iter().map(|h| (h.epoch, h.loss, h.val_accuracy)).collect(),
        best_epoch: report.best_epoch,
        best_val: report.best_val_accuracy,
        test_accuracy,
        parameters,
        train_ms,
    })
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String), CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let ck = Checkpoint::from_bytes(&bytes)?;
    let meta: serde_json::Value =
        serde_json::from_str(&ck.metadata).map_err(|e| CliError::Data(format!("{}: checkpoint metadata: {e}", path.display())))?;
    let scalar = meta["scalar"].as_str().unwrap_or("f64").to_string();
    Ok((ck, scalar))
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let (ck, scalar) = load_checkpoint(checkpoint)?;
    let ds = load_dataset_dir(data)?;
    let encoder = TextEncoder::new(cfg.embedding.clone())?;
    let (probs, arch) = match scalar.as_str() {
        "f32" => predict_test::<f32>(&ck, &encoder, &ds)?,
        _ => predict_test::<f64>(&ck, &encoder, &ds)?,
    };
    let test = &ds.splits.test;
    if test.is_empty() {
        return Err(CliError::Data("test split is empty".into()));
    }
    let preds: Vec<bool> = probs.iter().map(|p| p.1).collect();
    let labels: Vec<bool> = test.iter().map(|s| s.label).collect();
    let acc = accuracy(&preds, &labels)?;
    let mut universe: Vec<String> = test.iter().map(|s| s.workflow.clone()).collect();
    universe.sort();
    universe.dedup();
    let k = cfg.k.unwrap_or_else(|| default_k(universe.len()));
    let outcomes: Vec<Outcome> =
        test.iter().zip(&preds).map(|(s, &p)| Outcome { workflow: s.workflow.clone(), predicted: p, actual: s.label }).collect();
    let ranking = utility_at_k(&universe, &outcomes, k)?;

    let domain = ds.tasks.first().map_or("synthetic".to_string(), |t| t.domain.to_string());
    let model = arch.to_string();
    let row = |metric: &str, value: f64| MetricRow { metric: metric.into(), domain: domain.clone(), model: model.clone(), value };
    let rows = vec![row("accuracy", acc), row(&format!("utility@{k}"), ranking.value())];

    let mut pred_csv = String::from("workflow,task,probability,predicted,label\n");
    for (s, (p, hit)) in test.iter().zip(&probs) {
        pred_csv.push_str(&format!("{},{},{p},{},{}\n", s.workflow, s.task, u8::from(*hit), u8::from(s.label)));
    }
    let truth = success_by_node_count(&ds.graphs, test);
    let predicted_labels: Vec<_> = test
        .iter()
        .zip(&preds)
        .map(|(s, &p)| crate::dataset::LabeledSample { workflow: s.workflow.clone(), task: s.task.clone(), label: p })
        .collect();
    let predicted = success_by_node_count(&ds.graphs, &predicted_labels);
    let mut size_csv = String::from("nodes,true_rate,predicted_rate\n");
    for (n, rate) in &truth {
        size_csv.push_str(&format!("{n},{rate},{}\n", predicted.get(n).copied().unwrap_or(f64::NAN)));
    }

    let mut outputs = Outputs::new(out)?;
    outputs.write("metrics.csv", metrics_csv(&rows).as_bytes())?;
    outputs.write("predictions.csv", pred_csv.as_bytes())?;
    outputs.write("by_node_count.csv", size_csv.as_bytes())?;
    let manifest = RunManifest {
        command: "eval".into(),
        config: to_value(cfg),
        seeds: cfg.seeds(),
        inputs: vec![checkpoint.display().to_string(), data.display().to_string()],
        outputs: outputs.artifacts,
        summary: serde_json::json!({
            "accuracy": acc,
            "k": k,
            "utility": ranking.value(),
            "true_top": ranking.true_top,
            "predicted_top": ranking.predicted_top,
        }),
        timings: BTreeMap::from([("total_ms".to_string(), ms(t0))]),
    };
    write_manifest(&out.join("manifest.json"), &manifest)
}

/// Probability and decision for every test pair, in split order.
fn predict_test<T: Scalar>(ck: &Checkpoint, encoder: &TextEncoder, ds: &LoadedDataset) -> Result<(Vec<(f64, bool)>, Arch), CliError> {
    let model = PredictorModel::<T>::from_checkpoint(ck)?;
    model.check_encoder(encoder)?;
    let data = EncodedDataset::<T>::encode(encoder, &ds.graphs, &ds.tasks, model.config())?;
    let samples = data.samples(&ds.splits.test)?;
    let refs = data.refs(&samples)?;
    let probs = model.predict_probabilities(&refs, 256)?;
    Ok((probs.into_iter().map(|p| (p.to_f64_lossy(), model.decide(p))).collect(), model.config().arch))
}

pub fn cmd_optimize(cfg: &RunConfig, checkpoint: Option<&Path>, reward: RewardKind, data: &Path, out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let ds = load_dataset_dir(data)?;
    let SearchTasks { train: n_train, test: n_test } = cfg.search_tasks;
    if n_train == 0 || n_test == 0 || n_train + n_test > ds.tasks.len() {
        return Err(CliError::Config(format!(
            "search_tasks wants {n_train} train + {n_test} test tasks, dataset has {}",
            ds.tasks.len()
        )));
    }
    let (train_tasks, rest) = ds.tasks.split_at(n_train);
    let test_tasks = &rest[..n_test];
    let executor = cfg.dataset.executor();
    let encoder = TextEncoder::new(cfg.embedding.clone())?;
    let model = match (reward, checkpoint) {
        (RewardKind::Gnn, None) => return Err(CliError::Config("--reward gnn needs --checkpoint".into())),
        (RewardKind::Gnn, Some(p)) => Some(PredictorModel::<f64>::from_checkpoint(&load_checkpoint(p)?.0)?),
        _ => None,
    };
    let source = match reward {
        RewardKind::Gnn => RewardSource::Gnn { model: model.as_ref().expect("loaded above"), encoder: &encoder },
        RewardKind::GroundTruth => RewardSource::GroundTruth,
        RewardKind::Random => RewardSource::Random { seed: cfg.seed },
    };
    let search = SearchConfig { seed: cfg.seed, ..cfg.search.clone() };
    let report = optimize(&default_seed_graph(), source, &search, &executor, &cfg.dataset.prompts, train_tasks, test_tasks)?;

    let mut outputs = Outputs::new(out)?;
    outputs.write("trace.csv", trace_csv(&report.trace).as_bytes())?;
    outputs.write("best_workflow.jsonl", to_jsonl(std::slice::from_ref(&report.best)).as_bytes())?;
    let mut inputs = vec![data.display().to_string()];
    if let Some(p) = checkpoint {
        inputs.push(p.display().to_string());
    }
    let mut summary = to_value(&report);
    if let Some(m) = summary.as_object_mut() {
        m.remove("wall_time_ms");
        m.remove("trace");
    }
    let manifest = RunManifest {
        command: format!("optimize --reward {reward}"),
        config: to_value(cfg),
        seeds: cfg.seeds(),
        inputs,
        outputs: outputs.artifacts,
        summary,
        timings: BTreeMap::from([("search_ms".to_string(), report.wall_time_ms), ("total_ms".to_string(), ms(t0))]),
    };
    write_manifest(&out.join("manifest.json"), &manifest)
}

const TRACE_HEADER: &str = "step,evaluations,executor_calls,predictor_calls,best_reward,best_test_score";

/// Series label for a trace file: its parent directory name, else its stem.
fn trace_label(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut series: Vec<Series> = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let header = text.lines().next().unwrap_or("").trim();
        if header == TRACE_HEADER {
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
                let cols: Vec<&str> = line.split(',').collect();
                let parse = |j: usize| -> Result<f64, CliError> {
                    cols.get(j)
                        .and_then(|c| c.trim().parse().ok())
                        .ok_or_else(|| CliError::Data(format!("{}: line {}: malformed trace row", path.display(), i + 1)))
                };
                points.push((parse(1)?, parse(5)?));
            }
            series.push(Series { name: trace_label(path), points });
        } else {
            rows.extend(parse_metrics_csv(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?);
        }
    }
    let mut outputs = Outputs::new(out)?;
    outputs.write("report.csv", metrics_csv(&rows).as_bytes())?;
    let bars: Vec<(String, f64)> = rows.iter().map(|r| (format!("{} {}", r.model, r.metric), r.value)).collect();
    outputs.write("metrics.svg", bar_chart_svg("Predictor metrics", &bars).as_bytes())?;
    if !series.is_empty() {
        outputs.write("search.svg", line_chart_svg("Best test score during search", "candidate evaluations", &series).as_bytes())?;
    }
    let manifest = RunManifest {
        command: "report".into(),
        config: serde_json::Value::Null,
        seeds: BTreeMap::new(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.artifacts,
        summary: serde_json::json!({ "metric_rows": rows.len(), "traces": series.len() }),
        timings: BTreeMap::from([("total_ms".to_string(), ms(t0))]),
    };
    write_manifest(&out.join("manifest.json"), &manifest)
}
