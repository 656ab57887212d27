//! Parameterized layers: registration plus tape-building forward passes.

use rand::Rng;

use super::params::ParamStore;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Fully connected y = x·W + b with W [d_in, d_out], b [d_out].
#[derive(Debug, Clone)]
pub struct Linear {
    pub name: String,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(name: impl Into<String>, d_in: usize, d_out: usize) -> Self {
        Self { name: name.into(), d_in, d_out }
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let bound = 1.0 / (self.d_in as f64).sqrt();
        store.register_uniform(&format!("{}.weight", self.name), vec![self.d_in, self.d_out], bound, rng)?;
        store.register(&format!("{}.bias", self.name), Tensor::zeros(vec![self.d_out]))?;
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        if tape.value(x).cols() != self.d_in {
            return Err(Error::shape(
                format!("linear `{}`", self.name),
                format!("input width {} but weight expects {}", tape.value(x).cols(), self.d_in),
            ));
        }
        let w = tape.param(store, &format!("{}.weight", self.name))?;
        let b = tape.param(store, &format!("{}.bias", self.name))?;
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

/// Gated recurrent cell.
///
/// z = σ(x·Wz + h·Uz + bz), r = σ(x·Wr + h·Ur + br),
/// n = tanh(x·Wn + r ⊙ (h·Un) + bn), h' = (1 − z) ⊙ n + z ⊙ h.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub name: String,
    pub d_in: usize,
    pub d_h: usize,
}

impl GruCell {
    pub fn new(name: impl Into<String>, d_in: usize, d_h: usize) -> Self {
        Self { name: name.into(), d_in, d_h }
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let bx = 1.0 / (self.d_in as f64).sqrt();
        let bh = 1.0 / (self.d_h as f64).sqrt();
        for gate in ["z", "r", "n"] {
            store.register_uniform(&format!("{}.w{gate}", self.name), vec![self.d_in, self.d_h], bx, rng)?;
            store.register_uniform(&format!("{}.u{gate}", self.name), vec![self.d_h, self.d_h], bh, rng)?;
            store.register(&format!("{}.b{gate}", self.name), Tensor::zeros(vec![self.d_h]))?;
        }
        Ok(())
    }

    /// One step: x_t [d_in], h_prev [d_h] -> h_next [d_h].
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
        h_prev: NodeId,
    ) -> Result<NodeId> {
        if tape.value(x).cols() != self.d_in || tape.value(h_prev).cols() != self.d_h {
            return Err(Error::shape(
                format!("gru `{}`", self.name),
                format!(
                    "x width {} (want {}), h width {} (want {})",
                    tape.value(x).cols(),
                    self.d_in,
                    tape.value(h_prev).cols(),
                    self.d_h
                ),
            ));
        }
        let gate = |tape: &mut Tape, which: &str, x: NodeId, h: NodeId| -> Result<NodeId> {
            let w = tape.param(store, &format!("{}.w{which}", self.name))?;
            let u = tape.param(store, &format!("{}.u{which}", self.name))?;
            let b = tape.param(store, &format!("{}.b{which}", self.name))?;
            let xw = tape.matmul(x, w)?;
            let hu = tape.matmul(h, u)?;
            let s = tape.add(xw, hu)?;
            tape.add_row(s, b)
        };

        let z_pre = gate(tape, "z", x, h_prev)?;
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, "r", x, h_prev)?;
        let r = tape.sigmoid(r_pre);

        let wn = tape.param(store, &format!("{}.wn", self.name))?;
        let un = tape.param(store, &format!("{}.un", self.name))?;
        let bn = tape.param(store, &format!("{}.bn", self.name))?;
        let xw = tape.matmul(x, wn)?;
        let hu = tape.matmul(h_prev, un)?;
        let rh = tape.mul(r, hu)?;
        let pre = tape.add(xw, rh)?;
        let pre = tape.add_row(pre, bn)?;
        let n = tape.tanh(pre);

        let keep = tape.one_minus(z);
        let new_part = tape.mul(keep, n)?;
        let old_part = tape.mul(z, h_prev)?;
        tape.add(new_part, old_part)
    }

    /// Run over a sequence of rank-1 inputs starting from zeros; returns the
    /// hidden state after each step.
    pub fn run(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        xs: &[NodeId],
    ) -> Result<Vec<NodeId>> {
        let mut h = tape.input(Tensor::zeros(vec![self.d_h]));
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            h = self.step(tape, store, x, h)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Token embedding table [vocab, dim].
#[derive(Debug, Clone)]
pub struct Embedding {
    pub name: String,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(name: impl Into<String>, vocab: usize, dim: usize) -> Self {
        Self { name: name.into(), vocab, dim }
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let bound = 1.0 / (self.dim as f64).sqrt();
        store.register_uniform(&self.name, vec![self.vocab, self.dim], bound, rng)
    }

    pub fn lookup(&self, tape: &mut Tape, store: &ParamStore, ids: &[usize]) -> Result<NodeId> {
        let table = tape.param(store, &self.name)?;
        tape.embed_lookup(table, ids)
    }
}

/// Per-row layer normalization with learned gain and offset.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub name: String,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), dim }
    }

    pub fn register(&self, store: &mut ParamStore) -> Result<()> {
        store.register(
            &format!("{}.gamma", self.name),
            Tensor::new(vec![self.dim], vec![1.0; self.dim])?,
        )?;
        store.register(&format!("{}.beta", self.name), Tensor::zeros(vec![self.dim]))?;
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let gamma = tape.param(store, &format!("{}.gamma", self.name))?;
        let beta = tape.param(store, &format!("{}.beta", self.name))?;
        tape.layer_norm(x, gamma, beta)
    }
}
