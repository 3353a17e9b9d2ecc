//! Message-passing layers over in-neighbourhoods with self-inclusion.
//!
//! ```text
//! GCN:  m_i = Σ_{j ∈ S_i} w_ij h_j            h_i' = ReLU(W m_i + b)
//! GAT:  z = W h,  e_ij = LeakyReLU(a_dst·z_i + a_src·z_j),  α_i = softmax_j e_ij
//!       m_i = Σ_{j ∈ S_i} α_ij z_j             h_i' = ReLU(m_i + b)
//! ```
//!
//! with `S_i = {i} ∪ N_in(i)`. Rows of `h` may stack several graphs; the
//! neighbourhood lists then use stacked row indices.

use rand::Rng;

use crate::gnn::{Arch, GnnError, Normalization};
use crate::graph::WorkflowGraph;
use crate::nn::{leaky_relu, leaky_relu_grad, relu, relu_backward, softmax_in_place, LinearLayer, Matrix, Param};
use crate::scalar::Scalar;

/// Aggregation sets per row, each entry `(source row, GCN weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods<T> {
    pub sets: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> Neighborhoods<T> {
    pub fn from_graph(graph: &WorkflowGraph, normalization: Normalization, bidirectional: bool) -> Self {
        let n = graph.node_count();
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (v, preds) in graph.in_adjacency().into_iter().enumerate() {
            members[v].extend(preds);
        }
        if bidirectional {
            for (u, succ) in graph.out_adjacency().into_iter().enumerate() {
                members[u].extend(succ);
            }
        }
        for m in &mut members {
            m.sort_unstable();
            m.dedup();
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        let sets = members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.iter()
                    .map(|&j| {
                        let w = match normalization {
                            Normalization::Mean => 1.0 / sizes[i] as f64,
                            Normalization::Symmetric => 1.0 / ((sizes[i] * sizes[j]) as f64).sqrt(),
                        };
                        (j, T::from_f64_lossy(w))
                    })
                    .collect()
            })
            .collect();
        Self { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Appends `other` with its row indices shifted by `offset`.
    pub fn extend_shifted(&mut self, other: &Self, offset: usize) {
        self.sets.extend(other.sets.iter().map(|s| s.iter().map(|&(j, w)| (j + offset, w)).collect()));
    }

    fn aggregate(&self, h: &Matrix<T>) -> Matrix<T> {
        let mut m = Matrix::zeros(h.rows(), h.cols());
        for (i, set) in self.sets.iter().enumerate() {
            let out = m.row_mut(i);
            for &(j, w) in set {
                out.iter_mut().zip(h.row(j)).for_each(|(o, &x)| *o += w * x);
            }
        }
        m
    }

    fn aggregate_backward(&self, upstream: &Matrix<T>) -> Matrix<T> {
        let mut d = Matrix::zeros(upstream.rows(), upstream.cols());
        for (i, set) in self.sets.iter().enumerate() {
            for &(j, w) in set {
                d.row_mut(j).iter_mut().zip(upstream.row(i)).for_each(|(o, &g)| *o += w * g);
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer<T> {
    pub linear: LinearLayer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer<T> {
    /// Shared projection; its bias is added after attention.
    pub linear: LinearLayer<T>,
    pub att_dst: Param<T>,
    pub att_src: Param<T>,
    pub negative_slope: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GnnLayer<T> {
    Gcn(GcnLayer<T>),
    Gat(GatLayer<T>),
}

#[derive(Debug, Clone)]
pub(crate) enum LayerCache<T> {
    Gcn { input: Matrix<T>, rows: Option<Vec<usize>>, pre: Matrix<T> },
    Gat { input: Matrix<T>, rows: Option<Vec<usize>>, z: Matrix<T>, scores: Vec<Vec<T>>, alpha: Vec<Vec<T>>, pre: Matrix<T> },
}

impl<T: Scalar> GnnLayer<T> {
    pub fn new<R: Rng>(arch: Arch, input: usize, output: usize, negative_slope: f64, rng: &mut R) -> Self {
        let linear = LinearLayer::xavier(input, output, rng);
        match arch {
            Arch::Gcn => GnnLayer::Gcn(GcnLayer { linear }),
            Arch::Gat => {
                let limit = (6.0 / (2 * output + 1) as f64).sqrt();
                GnnLayer::Gat(GatLayer {
                    linear,
                    att_dst: Param::new(Matrix::uniform(1, output, limit, rng)),
                    att_src: Param::new(Matrix::uniform(1, output, limit, rng)),
                    negative_slope: T::from_f64_lossy(negative_slope),
                })
            }
        }
    }

    pub fn linear(&self) -> &LinearLayer<T> {
        match self {
            GnnLayer::Gcn(l) => &l.linear,
            GnnLayer::Gat(l) => &l.linear,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.linear().input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.linear().output_dim()
    }

    pub fn forward(&self, nbrs: &Neighborhoods<T>, h: &Matrix<T>) -> Result<Matrix<T>, GnnError> {
        Ok(self.forward_cached(nbrs, h, None)?.0)
    }

    /// With `rows = Some(idx)`, node `i` reads its state from `h.row(idx[i])`,
    /// so repeated input rows are projected once.
    pub(crate) fn forward_cached(
        &self,
        nbrs: &Neighborhoods<T>,
        h: &Matrix<T>,
        rows: Option<Vec<usize>>,
    ) -> Result<(Matrix<T>, LayerCache<T>), GnnError> {
        let nodes = rows.as_ref().map_or(h.rows(), Vec::len);
        if nodes != nbrs.len() {
            return Err(GnnError::Shape(format!("{nodes} feature rows for {} nodes", nbrs.len())));
        }
        if rows.as_ref().is_some_and(|r| r.iter().any(|&i| i >= h.rows())) {
            return Err(GnnError::Shape("row index past the end of the inputs".into()));
        }
        if h.cols() != self.input_dim() {
            return Err(GnnError::Shape(format!("features of width {} for a layer expecting {}", h.cols(), self.input_dim())));
        }
        let linear = self.linear();
        let z = gather(h.matmul_t(&linear.weight.value)?, rows.as_deref());
        let bias = linear.bias.value.as_slice();
        match self {
            GnnLayer::Gcn(_) => {
                let mut pre = nbrs.aggregate(&z);
                pre.add_row(bias)?;
                let out = relu(&pre);
                Ok((out, LayerCache::Gcn { input: h.clone(), rows, pre }))
            }
            GnnLayer::Gat(l) => {
                let a_dst = l.att_dst.value.as_slice();
                let a_src = l.att_src.value.as_slice();
                let dst_term: Vec<T> = (0..z.rows()).map(|i| dot(z.row(i), a_dst)).collect();
                let src_term: Vec<T> = (0..z.rows()).map(|i| dot(z.row(i), a_src)).collect();
                let mut scores = Vec::with_capacity(z.rows());
                let mut alpha = Vec::with_capacity(z.rows());
                let mut pre = Matrix::zeros(z.rows(), z.cols());
                for (i, set) in nbrs.sets.iter().enumerate() {
                    let s: Vec<T> = set.iter().map(|&(j, _)| dst_term[i] + src_term[j]).collect();
                    let mut a: Vec<T> = s.iter().map(|&x| leaky_relu(x, l.negative_slope)).collect();
                    softmax_in_place(&mut a);
                    let row = pre.row_mut(i);
                    row.copy_from_slice(bias);
                    for (&(j, _), &w) in set.iter().zip(&a) {
                        row.iter_mut().zip(z.row(j)).for_each(|(o, &x)| *o += w * x);
                    }
                    scores.push(s);
                    alpha.push(a);
                }
                let out = relu(&pre);
                Ok((out, LayerCache::Gat { input: h.clone(), rows, z, scores, alpha, pre }))
            }
        }
    }

    /// Accumulates parameter gradients; returns `∂L/∂h` per node when `want_input`.
    pub(crate) fn backward(
        &mut self,
        nbrs: &Neighborhoods<T>,
        cache: &LayerCache<T>,
        upstream: &Matrix<T>,
        want_input: bool,
    ) -> Result<Option<Matrix<T>>, GnnError> {
        match (self, cache) {
            (GnnLayer::Gcn(l), LayerCache::Gcn { input, rows, pre }) => {
                let d_pre = relu_backward(pre, upstream);
                d_pre.col_sums_acc(l.linear.bias.grad.as_mut_slice());
                let dz = nbrs.aggregate_backward(&d_pre);
                input_grads(&mut l.linear, input, rows.as_deref(), dz, want_input)
            }
            (GnnLayer::Gat(l), LayerCache::Gat { input, rows, z, scores, alpha, pre }) => {
                let d_pre = relu_backward(pre, upstream);
                d_pre.col_sums_acc(l.linear.bias.grad.as_mut_slice());
                let width = z.cols();
                let mut dz = Matrix::zeros(z.rows(), width);
                let mut d_dst = vec![T::zero(); z.rows()];
                let mut d_src = vec![T::zero(); z.rows()];
                for (i, set) in nbrs.sets.iter().enumerate() {
                    let dm = d_pre.row(i);
                    let a = &alpha[i];
                    let d_alpha: Vec<T> = set.iter().map(|&(j, _)| dot(dm, z.row(j))).collect();
                    for (&(j, _), &w) in set.iter().zip(a) {
                        dz.row_mut(j).iter_mut().zip(dm).for_each(|(o, &g)| *o += w * g);
                    }
                    let weighted: T = a.iter().zip(&d_alpha).map(|(&x, &y)| x * y).sum();
                    for (k, &(j, _)) in set.iter().enumerate() {
                        let d_e = a[k] * (d_alpha[k] - weighted);
                        let d_s = d_e * leaky_relu_grad(scores[i][k], l.negative_slope);
                        d_dst[i] += d_s;
                        d_src[j] += d_s;
                    }
                }
                // s_ij = a_dst·z_i + a_src·z_j
                let a_dst = l.att_dst.value.as_slice().to_vec();
                let a_src = l.att_src.value.as_slice().to_vec();
                for r in 0..z.rows() {
                    let (gd, gs) = (d_dst[r], d_src[r]);
                    if gd == T::zero() && gs == T::zero() {
                        continue;
                    }
                    let zr = z.row(r);
                    l.att_dst.grad.as_mut_slice().iter_mut().zip(zr).for_each(|(o, &x)| *o += gd * x);
                    l.att_src.grad.as_mut_slice().iter_mut().zip(zr).for_each(|(o, &x)| *o += gs * x);
                    dz.row_mut(r).iter_mut().zip(a_dst.iter().zip(&a_src)).for_each(|(o, (&ad, &as_))| *o += gd * ad + gs * as_);
                }
                input_grads(&mut l.linear, input, rows.as_deref(), dz, want_input)
            }
            _ => Err(GnnError::Shape("layer cache does not match layer kind".into())),
        }
    }

    pub fn zero_grad(&mut self) {
        match self {
            GnnLayer::Gcn(l) => l.linear.zero_grad(),
            GnnLayer::Gat(l) => {
                l.linear.zero_grad();
                l.att_dst.zero_grad();
                l.att_src.zero_grad();
            }
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<T>)>) {
        match self {
            GnnLayer::Gcn(l) => {
                out.push((format!("{prefix}.weight"), &mut l.linear.weight));
                out.push((format!("{prefix}.bias"), &mut l.linear.bias));
            }
            GnnLayer::Gat(l) => {
                out.push((format!("{prefix}.weight"), &mut l.linear.weight));
                out.push((format!("{prefix}.bias"), &mut l.linear.bias));
                out.push((format!("{prefix}.att_dst"), &mut l.att_dst));
                out.push((format!("{prefix}.att_src"), &mut l.att_src));
            }
        }
    }

    pub(crate) fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<T>)>) {
        match self {
            GnnLayer::Gcn(l) => {
                out.push((format!("{prefix}.weight"), &l.linear.weight));
                out.push((format!("{prefix}.bias"), &l.linear.bias));
            }
            GnnLayer::Gat(l) => {
                out.push((format!("{prefix}.weight"), &l.linear.weight));
                out.push((format!("{prefix}.bias"), &l.linear.bias));
                out.push((format!("{prefix}.att_dst"), &l.att_dst));
                out.push((format!("{prefix}.att_src"), &l.att_src));
            }
        }
    }
}

/// `dz` is `∂L/∂z` for `z = gather(input · Wᵀ)`.
fn input_grads<T: Scalar>(
    linear: &mut LinearLayer<T>,
    input: &Matrix<T>,
    rows: Option<&[usize]>,
    dz: Matrix<T>,
    want_input: bool,
) -> Result<Option<Matrix<T>>, GnnError> {
    let d_in = if want_input { Some(dz.matmul(&linear.weight.value)?) } else { None };
    let dz = match rows {
        None => dz,
        Some(idx) => {
            let mut acc = Matrix::zeros(input.rows(), dz.cols());
            for (i, &r) in idx.iter().enumerate() {
                acc.row_mut(r).iter_mut().zip(dz.row(i)).for_each(|(o, &g)| *o += g);
            }
            acc
        }
    };
    dz.t_matmul_acc(input, &mut linear.weight.grad)?;
    Ok(d_in)
}

fn gather<T: Scalar>(m: Matrix<T>, rows: Option<&[usize]>) -> Matrix<T> {
    let Some(idx) = rows else { return m };
    let mut out = Matrix::zeros(idx.len(), m.cols());
    for (i, &r) in idx.iter().enumerate() {
        out.row_mut(i).copy_from_slice(m.row(r));
    }
    out
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
