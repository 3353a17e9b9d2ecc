use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::TextEncoder;
use crate::gnn::layer::{GnnLayer, LayerCache, Neighborhoods};
use crate::gnn::{GnnError, PredictorConfig};
use crate::graph::WorkflowGraph;
use crate::nn::{relu, relu_backward, sigmoid, Checkpoint, LinearLayer, Matrix, NamedTensor, Param};
use crate::scalar::Scalar;
use crate::task::TaskInstance;

/// A workflow prepared for the model: encoded prompts plus aggregation sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub features: Matrix<T>,
    pub nbrs: Neighborhoods<T>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn new(graph: &WorkflowGraph, features: Matrix<T>, cfg: &PredictorConfig) -> Result<Self, GnnError> {
        if features.rows() != graph.node_count() {
            return Err(GnnError::Shape(format!("{} feature rows for {} nodes", features.rows(), graph.node_count())));
        }
        if features.cols() != cfg.input_dim {
            return Err(GnnError::Shape(format!(
                "node features have width {}, model expects input_dim {}",
                features.cols(),
                cfg.input_dim
            )));
        }
        if graph.node_count() == 0 {
            return Err(GnnError::Shape(format!("graph {} has no nodes", graph.id)));
        }
        let report = graph.validate();
        if !report.is_valid() {
            return Err(GnnError::Graph(format!("graph {}: {report}", graph.id)));
        }
        Ok(Self { features, nbrs: Neighborhoods::from_graph(graph, cfg.normalization, cfg.bidirectional) })
    }

    pub fn encode(graph: &WorkflowGraph, encoder: &TextEncoder, cfg: &PredictorConfig) -> Result<Self, GnnError> {
        Self::new(graph, encoder.encode_nodes(graph)?, cfg)
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }
}

pub fn encode_task_text<T: Scalar>(encoder: &TextEncoder, task: &TaskInstance) -> Result<Vec<T>, GnnError> {
    Ok(encoder.encode_text(&task.text)?.into_iter().map(T::from_f64_lossy).collect())
}

/// One (workflow, task) pair fed to the model.
#[derive(Debug, Clone, Copy)]
pub struct SampleRef<'a, T> {
    pub graph: &'a GraphInput<T>,
    pub task: &'a [T],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub probability: T,
    pub label: bool,
    pub graph_embedding: Option<Vec<T>>,
    pub task_embedding: Option<Vec<T>>,
}

/// Workflow encoder (stacked message-passing layers + mean pooling), task
/// projection (`Linear + ReLU`), and a fusion head
/// (`Linear(2h→h) + ReLU + Linear(h→1)`) producing one logit.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel<T> {
    config: PredictorConfig,
    pub layers: Vec<GnnLayer<T>>,
    pub proj: LinearLayer<T>,
    pub head_hidden: LinearLayer<T>,
    pub head_out: LinearLayer<T>,
}

pub(crate) struct BatchForward<T> {
    nbrs: Neighborhoods<T>,
    spans: Vec<(usize, usize)>,
    caches: Vec<LayerCache<T>>,
    /// Per sample, the row of its graph / task in the deduplicated inputs.
    gidx: Vec<usize>,
    tidx: Vec<usize>,
    task_in: Matrix<T>,
    task_pre: Matrix<T>,
    head_pre: Matrix<T>,
    head_act: Matrix<T>,
    pub(crate) graph_emb: Matrix<T>,
    pub(crate) task_emb: Matrix<T>,
    pub(crate) logits: Vec<T>,
}

impl<T: Scalar> PredictorModel<T> {
    /// Xavier-initialized model seeded from `config.seed`.
    pub fn new(config: PredictorConfig) -> Result<Self, GnnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|l| {
                let input = if l == 0 { config.input_dim } else { h };
                GnnLayer::new(config.arch, input, h, config.gat_negative_slope, &mut rng)
            })
            .collect();
        let proj = LinearLayer::xavier(config.input_dim, h, &mut rng);
        let head_hidden = LinearLayer::xavier(2 * h, h, &mut rng);
        let head_out = LinearLayer::xavier(h, 1, &mut rng);
        Ok(Self { config, layers, proj, head_hidden, head_out })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut PredictorConfig {
        &mut self.config
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.params(&format!("gnn.{l}"), &mut out);
        }
        out.push(("proj.weight".into(), &self.proj.weight));
        out.push(("proj.bias".into(), &self.proj.bias));
        out.push(("head.0.weight".into(), &self.head_hidden.weight));
        out.push(("head.0.bias".into(), &self.head_hidden.bias));
        out.push(("head.1.weight".into(), &self.head_out.weight));
        out.push(("head.1.bias".into(), &self.head_out.bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.params_mut(&format!("gnn.{l}"), &mut out);
        }
        out.push(("proj.weight".into(), &mut self.proj.weight));
        out.push(("proj.bias".into(), &mut self.proj.bias));
        out.push(("head.0.weight".into(), &mut self.head_hidden.weight));
        out.push(("head.0.bias".into(), &mut self.head_hidden.bias));
        out.push(("head.1.weight".into(), &mut self.head_out.weight));
        out.push(("head.1.bias".into(), &mut self.head_out.bias));
        out
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|(_, p)| p.value.is_finite())
    }

    /// Applies message-passing layer `layer` to node states `h`.
    pub fn gnn_layer_forward(&self, layer: usize, graph: &GraphInput<T>, h: &Matrix<T>) -> Result<Matrix<T>, GnnError> {
        let l = self.layers.get(layer).ok_or_else(|| GnnError::Shape(format!("no layer {layer}")))?;
        l.forward(&graph.nbrs, h)
    }

    /// Graph-level embedding: all layers, then mean over nodes.
    pub fn encode_workflow(&self, graph: &GraphInput<T>) -> Result<Vec<T>, GnnError> {
        let mut h = graph.features.clone();
        for l in &self.layers {
            h = l.forward(&graph.nbrs, &h)?;
        }
        Ok(mean_rows(&h, 0, h.rows()))
    }

    pub fn encode_task(&self, task: &[T]) -> Result<Vec<T>, GnnError> {
        let x = Matrix::row_vector(task.to_vec());
        Ok(relu(&self.proj.forward(&x)?).into_vec())
    }

    pub fn predict_encoded(&self, graph: &GraphInput<T>, task: &[T]) -> Result<Prediction<T>, GnnError> {
        let fw = self.forward_batch(&[SampleRef { graph, task }])?;
        let p = sigmoid(fw.logits[0]);
        Ok(Prediction {
            probability: p,
            label: self.decide(p),
            graph_embedding: Some(fw.graph_emb.row(0).to_vec()),
            task_embedding: Some(fw.task_emb.row(0).to_vec()),
        })
    }

    pub fn predict(&self, encoder: &TextEncoder, graph: &WorkflowGraph, task: &TaskInstance) -> Result<Prediction<T>, GnnError> {
        self.check_encoder(encoder)?;
        let input = GraphInput::encode(graph, encoder, &self.config)?;
        let t = encode_task_text(encoder, task)?;
        self.predict_encoded(&input, &t)
    }

    pub fn check_encoder(&self, encoder: &TextEncoder) -> Result<(), GnnError> {
        if encoder.dim() != self.config.input_dim {
            return Err(GnnError::Config(format!(
                "embedding dim {} does not match the model's input_dim {}",
                encoder.dim(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    pub fn decide(&self, probability: T) -> bool {
        probability >= T::from_f64_lossy(self.config.threshold)
    }

    /// Probabilities for a batch of samples, evaluated in chunks of `chunk`.
    pub fn predict_probabilities(&self, samples: &[SampleRef<'_, T>], chunk: usize) -> Result<Vec<T>, GnnError> {
        let mut out = Vec::with_capacity(samples.len());
        for c in samples.chunks(chunk.max(1)) {
            out.extend(self.forward_batch(c)?.logits.into_iter().map(sigmoid));
        }
        Ok(out)
    }

    /// Forward pass over a batch. Each distinct graph and task (by address)
    /// is encoded once and the fusion head is split into its graph and task
    /// halves, so repeated inputs share their work.
    pub(crate) fn forward_batch(&self, samples: &[SampleRef<'_, T>]) -> Result<BatchForward<T>, GnnError> {
        let d0 = self.config.input_dim;
        let mut graphs: Vec<&GraphInput<T>> = Vec::new();
        let mut tasks: Vec<&[T]> = Vec::new();
        let mut graph_slot = HashMap::new();
        let mut task_slot = HashMap::new();
        let mut gidx = Vec::with_capacity(samples.len());
        let mut tidx = Vec::with_capacity(samples.len());
        for s in samples {
            if s.graph.features.cols() != d0 || s.task.len() != d0 {
                return Err(GnnError::Shape(format!(
                    "input width {}/{} for a model with input_dim {d0}",
                    s.graph.features.cols(),
                    s.task.len()
                )));
            }
            gidx.push(*graph_slot.entry(s.graph as *const GraphInput<T>).or_insert_with(|| {
                graphs.push(s.graph);
                graphs.len() - 1
            }));
            tidx.push(*task_slot.entry(s.task.as_ptr()).or_insert_with(|| {
                tasks.push(s.task);
                tasks.len() - 1
            }));
        }

        let total: usize = graphs.iter().map(|g| g.node_count()).sum();
        let mut x = Matrix::zeros(total, d0);
        let mut nbrs = Neighborhoods { sets: Vec::with_capacity(total) };
        let mut spans = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for g in &graphs {
            let n = g.node_count();
            x.as_mut_slice()[offset * d0..(offset + n) * d0].copy_from_slice(g.features.as_slice());
            nbrs.extend_shifted(&g.nbrs, offset);
            spans.push((offset, n));
            offset += n;
        }
        let mut task_in = Matrix::zeros(tasks.len(), d0);
        for (r, t) in tasks.iter().enumerate() {
            task_in.row_mut(r).copy_from_slice(t);
        }

        let mut caches = Vec::with_capacity(self.layers.len());
        // Node states repeat heavily (agents share role prompts, and nodes with
        // equal neighbourhoods stay equal), so each layer projects each
        // distinct row once.
        let mut h = x;
        for l in &self.layers {
            let (distinct, rows) = distinct_rows(&h)?;
            let (next, cache) = l.forward_cached(&nbrs, &distinct, Some(rows))?;
            caches.push(cache);
            h = next;
        }
        let hidden = self.config.hidden;
        let mut graph_emb = Matrix::zeros(graphs.len(), hidden);
        for (r, &(start, n)) in spans.iter().enumerate() {
            graph_emb.row_mut(r).copy_from_slice(&mean_rows(&h, start, n));
        }
        let task_pre = self.proj.forward(&task_in)?;
        let task_emb = relu(&task_pre);

        let w = self.head_hidden.weight.value.as_slice();
        let graph_part = half_matmul_t(&graph_emb, w, 0, hidden);
        let task_part = half_matmul_t(&task_emb, w, hidden, hidden);
        let bias = self.head_hidden.bias.value.as_slice();
        let mut head_pre = Matrix::zeros(samples.len(), hidden);
        for b in 0..samples.len() {
            let (gr, tr) = (graph_part.row(gidx[b]), task_part.row(tidx[b]));
            for (k, o) in head_pre.row_mut(b).iter_mut().enumerate() {
                *o = gr[k] + tr[k] + bias[k];
            }
        }
        let head_act = relu(&head_pre);
        let logits = self.head_out.forward(&head_act)?.into_vec();
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(GnnError::NonFinite("logit".into()));
        }
        Ok(BatchForward { nbrs, spans, caches, gidx, tidx, task_in, task_pre, head_pre, head_act, graph_emb, task_emb, logits })
    }

    /// Accumulates `Σ_b dlogits[b] · ∂logit_b/∂θ` into the gradient buffers.
    pub(crate) fn backward_batch(&mut self, fw: &BatchForward<T>, dlogits: &[T]) -> Result<(), GnnError> {
        let b = dlogits.len();
        if b != fw.logits.len() {
            return Err(GnnError::Shape("one upstream gradient per logit".into()));
        }
        let hidden = self.config.hidden;
        let d_logit = Matrix::from_vec(b, 1, dlogits.to_vec())?;
        let d_act = self.head_out.backward(&fw.head_act, &d_logit)?;
        let d_head_pre = relu_backward(&fw.head_pre, &d_act);
        d_head_pre.col_sums_acc(self.head_hidden.bias.grad.as_mut_slice());

        let mut s_graph = Matrix::zeros(fw.graph_emb.rows(), hidden);
        let mut s_task = Matrix::zeros(fw.task_emb.rows(), hidden);
        for r in 0..b {
            let g = d_head_pre.row(r);
            s_graph.row_mut(fw.gidx[r]).iter_mut().zip(g).for_each(|(o, &x)| *o += x);
            s_task.row_mut(fw.tidx[r]).iter_mut().zip(g).for_each(|(o, &x)| *o += x);
        }
        let dw = self.head_hidden.weight.grad.as_mut_slice();
        half_grad_acc(&s_graph, &fw.graph_emb, dw, 0, hidden);
        half_grad_acc(&s_task, &fw.task_emb, dw, hidden, hidden);
        let w = self.head_hidden.weight.value.as_slice();
        let d_graph = half_matmul(&s_graph, w, 0, hidden);
        let d_task = half_matmul(&s_task, w, hidden, hidden);

        let d_task_pre = relu_backward(&fw.task_pre, &d_task);
        self.proj.backward_params(&fw.task_in, &d_task_pre)?;

        let total: usize = fw.spans.iter().map(|s| s.1).sum();
        let mut d_h = Matrix::zeros(total, hidden);
        for (r, &(start, n)) in fw.spans.iter().enumerate() {
            let scale = T::one() / T::from_usize_lossy(n);
            let g: Vec<T> = d_graph.row(r).iter().map(|&x| x * scale).collect();
            for i in start..start + n {
                d_h.row_mut(i).copy_from_slice(&g);
            }
        }
        for l in (0..self.layers.len()).rev() {
            let want_input = l > 0;
            match self.layers[l].backward(&fw.nbrs, &fw.caches[l], &d_h, want_input)? {
                Some(d) => d_h = d,
                None => break,
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::json!({ "scalar": T::NAME, "config": self.config });
        Checkpoint {
            metadata: serde_json::to_string(&meta).expect("config serializes"),
            tensors: self
                .params()
                .into_iter()
                .map(|(name, p)| NamedTensor {
                    name,
                    shape: vec![p.value.rows(), p.value.cols()],
                    data: p.value.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, GnnError> {
        let meta: serde_json::Value =
            serde_json::from_str(&ck.metadata).map_err(|e| GnnError::Checkpoint(format!("metadata: {e}")))?;
        let config: PredictorConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| GnnError::Checkpoint(format!("config: {e}")))?;
        let mut model = Self::new(config)?;
        let expected = model.params().len();
        if ck.tensors.len() != expected {
            return Err(GnnError::Checkpoint(format!("{} tensors, expected {expected}", ck.tensors.len())));
        }
        for (name, p) in model.params_mut() {
            let t = ck.get(&name).ok_or_else(|| GnnError::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape != [p.value.rows(), p.value.cols()] {
                return Err(GnnError::Checkpoint(format!(
                    "tensor {name} has shape {:?}, config implies {}x{}",
                    t.shape,
                    p.value.rows(),
                    p.value.cols()
                )));
            }
            if t.data.iter().any(|x| !x.is_finite()) {
                return Err(GnnError::Checkpoint(format!("tensor {name} holds non-finite values")));
            }
            for (dst, &src) in p.value.as_mut_slice().iter_mut().zip(&t.data) {
                *dst = T::from_f64_lossy(src);
            }
        }
        Ok(model)
    }

    /// Copies parameter values from `other` (same configuration).
    pub(crate) fn copy_values_from(&mut self, other: &Self) {
        let src: Vec<Matrix<T>> = other.params().into_iter().map(|(_, p)| p.value.clone()).collect();
        for ((_, p), v) in self.params_mut().into_iter().zip(src) {
            p.value = v;
        }
    }
}

fn mean_rows<T: Scalar>(h: &Matrix<T>, start: usize, n: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); h.cols()];
    for i in start..start + n {
        acc.iter_mut().zip(h.row(i)).for_each(|(a, &x)| *a += x);
    }
    let inv = T::one() / T::from_usize_lossy(n.max(1));
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

// The head weight is `h x 2h` row-major; the graph half is columns `0..h`
// and the task half is columns `h..2h`, addressed below by `col0`.

/// `x · W[:, col0..col0+h]^T`
fn distinct_rows<T: Scalar>(h: &Matrix<T>) -> Result<(Matrix<T>, Vec<usize>), GnnError> {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut data = Vec::new();
    let rows = (0..h.rows())
        .map(|i| {
            let row = h.row(i);
            let key = row.iter().map(|v| v.to_f64_lossy().to_bits()).collect();
            *slot.entry(key).or_insert_with(|| {
                data.extend_from_slice(row);
                data.len() / h.cols() - 1
            })
        })
        .collect();
    Ok((Matrix::from_vec(data.len() / h.cols(), h.cols(), data)?, rows))
}

fn half_matmul_t<T: Scalar>(x: &Matrix<T>, w: &[T], col0: usize, h: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(x.rows(), h);
    if x.rows() > 0 {
        T::gemm(x.rows(), h, h, T::one(), x.as_slice(), h as isize, 1, &w[col0..], 1, 2 * h as isize, T::zero(), out.as_mut_slice(), h as isize, 1);
    }
    out
}

/// `g · W[:, col0..col0+h]`
fn half_matmul<T: Scalar>(g: &Matrix<T>, w: &[T], col0: usize, h: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(g.rows(), h);
    if g.rows() > 0 {
        T::gemm(g.rows(), h, h, T::one(), g.as_slice(), h as isize, 1, &w[col0..], 2 * h as isize, 1, T::zero(), out.as_mut_slice(), h as isize, 1);
    }
    out
}

/// `dW[:, col0..col0+h] += g^T · x`
fn half_grad_acc<T: Scalar>(g: &Matrix<T>, x: &Matrix<T>, dw: &mut [T], col0: usize, h: usize) {
    if g.rows() > 0 {
        T::gemm(h, g.rows(), h, T::one(), g.as_slice(), 1, h as isize, x.as_slice(), h as isize, 1, T::one(), &mut dw[col0..], 2 * h as isize, 1);
    }
}
