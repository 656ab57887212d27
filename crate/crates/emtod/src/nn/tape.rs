//! Reverse-mode differentiation over a recorded op graph.
//!
//! Ops are evaluated eagerly as they are recorded; `backward` walks the
//! record in reverse and produces gradients for every parameter leaf.
//! The op set is exactly what the model stack needs — rank-1 and rank-2
//! tensors only, no general broadcasting.

use std::collections::HashMap;

use super::params::{GradBuffer, ParamStore};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{Error, Result};

pub type NodeId = usize;

const BCE_EPS: f64 = 1e-7;
const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(String),
    MatMul { a: NodeId, b: NodeId },
    MatMulNt { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    AddRow { a: NodeId, bias: NodeId },
    Mul { a: NodeId, b: NodeId },
    Affine { a: NodeId, mul: f64 },
    Sigmoid { a: NodeId },
    Tanh { a: NodeId },
    Gelu { a: NodeId },
    SoftmaxRows { a: NodeId },
    Concat { parts: Vec<NodeId> },
    StackRows { rows: Vec<NodeId> },
    Row { a: NodeId, index: usize },
    EmbedLookup { table: NodeId, ids: Vec<usize> },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId },
    MeanAll { a: NodeId },
    DotConst { a: NodeId, weights: Tensor },
    BceMean { p: NodeId, targets: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound_params: HashMap<String, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Bind a parameter leaf; repeated binds of the same name share one node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.bound_params.get(name) {
            return Ok(id);
        }
        let value = store.value(name)?.clone();
        let id = self.push(value, Op::Param(name.to_string()));
        self.bound_params.insert(name.to_string(), id);
        Ok(id)
    }

    /// a[m,k] (or [k]) times b[k,n].
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = (self.value(a).rows(), self.value(a).cols());
        let bs = self.value(b).shape();
        if bs.len() != 2 || bs[0] != ka {
            return Err(Error::shape(
                "matmul",
                format!("lhs {:?} vs rhs {:?}", self.value(a).shape(), bs),
            ));
        }
        let n = bs[1];
        let mut out = vec![0.0; m * n];
        matmul_acc(&mut out, self.value(a).data(), self.value(b).data(), m, ka, n);
        let shape = if self.value(a).shape().len() == 1 { vec![n] } else { vec![m, n] };
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul { a, b }))
    }

    /// a[m,k] (or [k]) times b[n,k] transposed: rows of `b` are the keys.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = (self.value(a).rows(), self.value(a).cols());
        let bs = self.value(b).shape();
        if bs.len() != 2 || bs[1] != ka {
            return Err(Error::shape(
                "matmul_nt",
                format!("lhs {:?} vs rhs {:?}", self.value(a).shape(), bs),
            ));
        }
        let n = bs[0];
        let mut out = vec![0.0; m * n];
        matmul_nt_acc(&mut out, self.value(a).data(), self.value(b).data(), m, ka, n);
        let shape = if self.value(a).shape().len() == 1 { vec![n] } else { vec![m, n] };
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMulNt { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Add { a, b }))
    }

    /// Broadcast a rank-1 bias over every row of `a`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let n = self.value(a).cols();
        if self.value(bias).shape() != [n] {
            return Err(Error::shape(
                "add_row",
                format!("rows of {:?} vs bias {:?}", self.value(a).shape(), self.value(bias).shape()),
            ));
        }
        let bias_data = self.value(bias).data().to_vec();
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + bias_data[i % n])
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::AddRow { a, bias }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "mul",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul { a, b }))
    }

    /// Elementwise `mul * x + add`.
    pub fn affine(&mut self, a: NodeId, mul: f64, add: f64) -> NodeId {
        let data = self.value(a).data().iter().map(|x| mul * x + add).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data).unwrap(), Op::Affine { a, mul })
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.affine(a, -1.0, 1.0)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| sigmoid_scalar(*x)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data).unwrap(), Op::Sigmoid { a })
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.tanh()).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data).unwrap(), Op::Tanh { a })
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| gelu_scalar(*x)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data).unwrap(), Op::Gelu { a })
    }

    /// Row-wise softmax with max-subtraction for stability.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = (self.value(a).rows(), self.value(a).cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.value(a).data()[i * n..(i + 1) * n];
            softmax_row(row, &mut data[i * n..(i + 1) * n]);
        }
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data).unwrap(), Op::SoftmaxRows { a })
    }

    /// Concatenate rank-1 tensors into one rank-1 tensor.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            if self.value(p).shape().len() != 1 {
                return Err(Error::shape("concat", "expects rank-1 parts"));
            }
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat { parts: parts.to_vec() }))
    }

    /// Stack rank-1 tensors of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(Error::shape("stack_rows", "no rows"));
        }
        let n = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if self.value(r).shape() != [n] {
                return Err(Error::shape("stack_rows", "rows differ in length or rank"));
            }
            data.extend_from_slice(self.value(r).data());
        }
        Ok(self.push(
            Tensor::new(vec![rows.len(), n], data)?,
            Op::StackRows { rows: rows.to_vec() },
        ))
    }

    /// Extract row `index` of a matrix as a rank-1 tensor.
    pub fn row(&mut self, a: NodeId, index: usize) -> Result<NodeId> {
        if self.value(a).shape().len() != 2 || index >= self.value(a).rows() {
            return Err(Error::shape(
                "row",
                format!("index {index} of {:?}", self.value(a).shape()),
            ));
        }
        let data = self.value(a).row_slice(index).to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row { a, index }))
    }

    /// Gather rows of an embedding table: ids -> [len(ids), dim].
    pub fn embed_lookup(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let ts = self.value(table).shape();
        if ts.len() != 2 {
            return Err(Error::shape("embed_lookup", "table must be rank-2"));
        }
        let (vocab, dim) = (ts[0], ts[1]);
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(Error::shape(
                    "embed_lookup",
                    format!("token id {id} out of vocab {vocab}"),
                ));
            }
            data.extend_from_slice(self.value(table).row_slice(id));
        }
        Ok(self.push(
            Tensor::new(vec![ids.len(), dim], data)?,
            Op::EmbedLookup { table, ids: ids.to_vec() },
        ))
    }

    /// Per-row layer normalization with learned gain/offset.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let n = self.value(x).cols();
        if self.value(gamma).shape() != [n] || self.value(beta).shape() != [n] {
            return Err(Error::shape("layer_norm", "gamma/beta must be rank-1 of row width"));
        }
        let m = self.value(x).rows();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.value(x).data()[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..n {
                let xhat = (row[j] - mean) * inv;
                data[i * n + j] = self.value(gamma).data()[j] * xhat + self.value(beta).data()[j];
            }
        }
        let shape = self.value(x).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::LayerNorm { x, gamma, beta }))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len() as f64;
        let s = self.value(a).data().iter().sum::<f64>() / n;
        self.push(Tensor::vector(vec![s]), Op::MeanAll { a })
    }

    /// Weighted sum against a constant — scalarizes a tensor for testing.
    pub fn dot_const(&mut self, a: NodeId, weights: Tensor) -> Result<NodeId> {
        if self.value(a).len() != weights.len() {
            return Err(Error::shape("dot_const", "length mismatch"));
        }
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(x, w)| x * w)
            .sum::<f64>();
        Ok(self.push(Tensor::vector(vec![s]), Op::DotConst { a, weights }))
    }

    /// Mean binary cross entropy against {0,1} targets, with probabilities
    /// clamped to [1e-7, 1 - 1e-7] before the logs.
    pub fn bce_mean(&mut self, p: NodeId, targets: Tensor) -> Result<NodeId> {
        if self.value(p).shape() != targets.shape() {
            return Err(Error::shape(
                "bce_mean",
                format!("p {:?} vs targets {:?}", self.value(p).shape(), targets.shape()),
            ));
        }
        let n = targets.len() as f64;
        let mut loss = 0.0;
        for (&pv, &yv) in self.value(p).data().iter().zip(targets.data()) {
            let pc = pv.clamp(BCE_EPS, 1.0 - BCE_EPS);
            loss -= yv * pc.ln() + (1.0 - yv) * (1.0 - pc).ln();
        }
        loss /= n;
        Ok(self.push(Tensor::vector(vec![loss]), Op::BceMean { p, targets }))
    }

    /// Reverse pass from a scalar node. Parameter gradients are accumulated
    /// into `out`, scaled by `seed`.
    pub fn backward(&self, loss: NodeId, seed: f64, out: &mut GradBuffer) -> Result<()> {
        if self.nodes[loss].value.len() != 1 {
            return Err(Error::shape("backward", "loss must be a scalar node"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![seed]);

        for id in (0..=loss).rev() {
            let Some(gy) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Param(name) => {
                    let value = &self.nodes[id].value;
                    out.accumulate(name, value.shape(), &gy);
                }
                Op::MatMul { a, b } => {
                    let (m, k) = (self.nodes[*a].value.rows(), self.nodes[*a].value.cols());
                    let n = self.nodes[*b].value.cols();
                    {
                        let ga = grad_slot(&mut grads, *a, m * k);
                        matmul_nt_acc(ga, &gy, self.nodes[*b].value.data(), m, n, k);
                    }
                    let gb = grad_slot(&mut grads, *b, k * n);
                    matmul_tn_acc(gb, self.nodes[*a].value.data(), &gy, m, k, n);
                }
                Op::MatMulNt { a, b } => {
                    let (m, k) = (self.nodes[*a].value.rows(), self.nodes[*a].value.cols());
                    let n = self.nodes[*b].value.rows();
                    {
                        let ga = grad_slot(&mut grads, *a, m * k);
                        matmul_acc(ga, &gy, self.nodes[*b].value.data(), m, n, k);
                    }
                    let gb = grad_slot(&mut grads, *b, n * k);
                    matmul_tn_acc(gb, &gy, self.nodes[*a].value.data(), m, n, k);
                }
                Op::Add { a, b } => {
                    add_into(grad_slot(&mut grads, *a, gy.len()), &gy);
                    add_into(grad_slot(&mut grads, *b, gy.len()), &gy);
                }
                Op::AddRow { a, bias } => {
                    let n = self.nodes[*bias].value.len();
                    add_into(grad_slot(&mut grads, *a, gy.len()), &gy);
                    let gb = grad_slot(&mut grads, *bias, n);
                    for (i, g) in gy.iter().enumerate() {
                        gb[i % n] += g;
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                    {
                        let ga = grad_slot(&mut grads, *a, gy.len());
                        for i in 0..gy.len() {
                            ga[i] += gy[i] * bv[i];
                        }
                    }
                    let gb = grad_slot(&mut grads, *b, gy.len());
                    for i in 0..gy.len() {
                        gb[i] += gy[i] * av[i];
                    }
                }
                Op::Affine { a, mul } => {
                    let ga = grad_slot(&mut grads, *a, gy.len());
                    for i in 0..gy.len() {
                        ga[i] += gy[i] * mul;
                    }
                }
                Op::Sigmoid { a } => {
                    let yv = self.nodes[id].value.data();
                    let ga = grad_slot(&mut grads, *a, gy.len());
                    for i in 0..gy.len() {
                        ga[i] += gy[i] * yv[i] * (1.0 - yv[i]);
                    }
                }
                Op::Tanh { a } => {
                    let yv = self.nodes[id].value.data();
                    let ga = grad_slot(&mut grads, *a, gy.len());
                    for i in 0..gy.len() {
                        ga[i] += gy[i] * (1.0 - yv[i] * yv[i]);
                    }
                }
                Op::Gelu { a } => {
                    let xv = self.nodes[*a].value.data();
                    let ga = grad_slot(&mut grads, *a, gy.len());
                    for i in 0..gy.len() {
                        ga[i] += gy[i] * gelu_derivative(xv[i]);
                    }
                }
                Op::SoftmaxRows { a } => {
                    let (m, n) = (self.nodes[id].value.rows(), self.nodes[id].value.cols());
                    let yv = self.nodes[id].value.data();
                    let ga = grad_slot(&mut grads, *a, m * n);
                    for i in 0..m {
                        let y_row = &yv[i * n..(i + 1) * n];
                        let g_row = &gy[i * n..(i + 1) * n];
                        let dot: f64 = y_row.iter().zip(g_row).map(|(y, g)| y * g).sum();
                        let out_row = &mut ga[i * n..(i + 1) * n];
                        for j in 0..n {
                            out_row[j] += y_row[j] * (g_row[j] - dot);
                        }
                    }
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        add_into(grad_slot(&mut grads, p, len), &gy[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::StackRows { rows } => {
                    let n = self.nodes[id].value.cols();
                    for (i, &r) in rows.iter().enumerate() {
                        add_into(grad_slot(&mut grads, r, n), &gy[i * n..(i + 1) * n]);
                    }
                }
                Op::Row { a, index } => {
                    let (m, n) = (self.nodes[*a].value.rows(), self.nodes[*a].value.cols());
                    let ga = grad_slot(&mut grads, *a, m * n);
                    add_into(&mut ga[index * n..(index + 1) * n], &gy);
                }
                Op::EmbedLookup { table, ids } => {
                    let (vocab, dim) =
                        (self.nodes[*table].value.rows(), self.nodes[*table].value.cols());
                    let gt = grad_slot(&mut grads, *table, vocab * dim);
                    for (r, &tok) in ids.iter().enumerate() {
                        add_into(&mut gt[tok * dim..(tok + 1) * dim], &gy[r * dim..(r + 1) * dim]);
                    }
                }
                Op::LayerNorm { x, gamma, beta } => {
                    let (m, n) = (self.nodes[*x].value.rows(), self.nodes[*x].value.cols());
                    let xv = self.nodes[*x].value.data();
                    let gv = self.nodes[*gamma].value.data();
                    let nf = n as f64;
                    let mut gx_acc = vec![0.0; m * n];
                    let mut ggamma_acc = vec![0.0; n];
                    let mut gbeta_acc = vec![0.0; n];
                    for i in 0..m {
                        let row = &xv[i * n..(i + 1) * n];
                        let g_row = &gy[i * n..(i + 1) * n];
                        let mean = row.iter().sum::<f64>() / nf;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                        let dxhat: Vec<f64> =
                            g_row.iter().zip(gv).map(|(g, gm)| g * gm).collect();
                        let mean_dxhat = dxhat.iter().sum::<f64>() / nf;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(&xhat).map(|(d, h)| d * h).sum::<f64>() / nf;
                        for j in 0..n {
                            gx_acc[i * n + j] +=
                                inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                            ggamma_acc[j] += g_row[j] * xhat[j];
                            gbeta_acc[j] += g_row[j];
                        }
                    }
                    add_into(grad_slot(&mut grads, *x, m * n), &gx_acc);
                    add_into(grad_slot(&mut grads, *gamma, n), &ggamma_acc);
                    add_into(grad_slot(&mut grads, *beta, n), &gbeta_acc);
                }
                Op::MeanAll { a } => {
                    let len = self.nodes[*a].value.len();
                    let g = gy[0] / len as f64;
                    let ga = grad_slot(&mut grads, *a, len);
                    for v in ga.iter_mut() {
                        *v += g;
                    }
                }
                Op::DotConst { a, weights } => {
                    let ga = grad_slot(&mut grads, *a, weights.len());
                    for (g, w) in ga.iter_mut().zip(weights.data()) {
                        *g += gy[0] * w;
                    }
                }
                Op::BceMean { p, targets } => {
                    let pv = self.nodes[*p].value.data();
                    let n = targets.len() as f64;
                    let gp = grad_slot(&mut grads, *p, targets.len());
                    for i in 0..targets.len() {
                        if pv[i] <= BCE_EPS || pv[i] >= 1.0 - BCE_EPS {
                            continue; // clamped region: flat in p
                        }
                        gp[i] += gy[0] * (pv[i] - targets.data()[i]) / (pv[i] * (1.0 - pv[i]) * n);
                    }
                }
            }
        }
        Ok(())
    }
}

fn grad_slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Precision;

    fn store() -> ParamStore {
        ParamStore::new(Precision::F64)
    }

    #[test]
    fn softmax_uniform_and_shifted() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(&[vec![0.0, 0.0, 0.0], vec![1000.0, 0.0, 0.0]]).unwrap());
        let y = tape.softmax_rows(x);
        let v = tape.value(y);
        for j in 0..3 {
            assert!((v.at(0, j) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(v.at(1, 0) > 0.999_999);
        assert!(v.is_finite());
    }

    #[test]
    fn softmax_two_logits_hand_value() {
        // row [1,2] -> [0.26894, 0.73106]
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(&[vec![1.0, 2.0]]).unwrap());
        let y = tape.softmax_rows(x);
        assert!((tape.value(y).at(0, 0) - 0.26894).abs() < 1e-5);
        assert!((tape.value(y).at(0, 1) - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn sigmoid_values_and_symmetry() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![0.0, 2.0, -2.0]));
        let y = tape.sigmoid(x);
        let v = tape.value(y).data().to_vec();
        assert_eq!(v[0], 0.5);
        assert!((v[1] - 0.88080).abs() < 1e-5);
        assert!((v[1] + v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bce_hand_values() {
        let mut tape = Tape::new();
        // p = [0.9, 0.2], y = [1, 0] -> (-ln 0.9 - ln 0.8) / 2
        let p = tape.input(Tensor::vector(vec![0.9, 0.2]));
        let loss = tape.bce_mean(p, Tensor::vector(vec![1.0, 0.0])).unwrap();
        assert!((tape.value(loss).item() - 0.16425).abs() < 1e-5);

        // p = 0.5 everywhere -> ln 2
        let mut tape = Tape::new();
        let p = tape.input(Tensor::vector(vec![0.5, 0.5, 0.5]));
        let loss = tape.bce_mean(p, Tensor::vector(vec![1.0, 0.0, 1.0])).unwrap();
        assert!((tape.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-12);

        // perfect prediction, pre-clamp
        let mut tape = Tape::new();
        let p = tape.input(Tensor::vector(vec![1.0, 0.0]));
        let loss = tape.bce_mean(p, Tensor::vector(vec![1.0, 0.0])).unwrap();
        assert!(tape.value(loss).item() >= 0.0);
        assert!(tape.value(loss).item() <= 1.1e-7);
    }

    #[test]
    fn matmul_grads_match_hand_derivation() {
        // loss = mean(A*B) with A=[[1,2]], B=[[3],[4]] -> loss = 11
        // dA = [[3,4]]/1, dB = [[1],[2]]/1
        let mut store = store();
        store
            .register("a", Tensor::matrix(&[vec![1.0, 2.0]]).unwrap())
            .unwrap();
        store
            .register("b", Tensor::matrix(&[vec![3.0], vec![4.0]]).unwrap())
            .unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, "a").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let c = tape.matmul(a, b).unwrap();
        let loss = tape.mean_all(c);
        assert_eq!(tape.value(loss).item(), 11.0);
        let mut buf = GradBuffer::new();
        tape.backward(loss, 1.0, &mut buf).unwrap();
        assert_eq!(buf.get("a").unwrap().data(), &[3.0, 4.0]);
        assert_eq!(buf.get("b").unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn param_nodes_are_shared_and_grads_accumulate() {
        // loss = mean(w + w) -> dw = 2
        let mut store = store();
        store.register("w", Tensor::vector(vec![5.0])).unwrap();
        let mut tape = Tape::new();
        let w1 = tape.param(&store, "w").unwrap();
        let w2 = tape.param(&store, "w").unwrap();
        assert_eq!(w1, w2);
        let s = tape.add(w1, w2).unwrap();
        let loss = tape.mean_all(s);
        let mut buf = GradBuffer::new();
        tape.backward(loss, 1.0, &mut buf).unwrap();
        assert_eq!(buf.get("w").unwrap().data(), &[2.0]);
    }

    #[test]
    fn forward_is_pure() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.input(Tensor::vector(vec![0.3, -1.7, 2.9]));
            let y = tape.gelu(x);
            let z = tape.tanh(y);
            tape.value(z).data().to_vec()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
