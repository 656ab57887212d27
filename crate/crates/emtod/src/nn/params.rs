//! Named parameter storage with gradient accumulators.

use std::collections::BTreeMap;

use rand::Rng;

use super::tensor::{Precision, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub value: Tensor,
    pub grad: Tensor,
}

/// Map from dotted parameter name to tensor plus gradient accumulator.
///
/// Iteration is always in sorted name order. In `Precision::F32` mode every
/// stored value is rounded through f32 on write, which keeps the in-memory
/// state bitwise equal to a saved-and-reloaded 32-bit checkpoint.
#[derive(Debug, Clone)]
pub struct ParamStore {
    precision: Precision,
    entries: BTreeMap<String, ParamEntry>,
}

impl ParamStore {
    pub fn new(precision: Precision) -> Self {
        Self {
            precision,
            entries: BTreeMap::new(),
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn register(&mut self, name: &str, mut value: Tensor) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        if self.precision == Precision::F32 {
            value.round_to_f32();
        }
        let grad = Tensor::zeros(value.shape().to_vec());
        self.entries.insert(name.to_string(), ParamEntry { value, grad });
        Ok(())
    }

    /// Register with uniform(-bound, +bound) init drawn from `rng`.
    pub fn register_uniform(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        bound: f64,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * bound - bound).collect();
        self.register(name, Tensor::new(shape, data)?)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn entry(&self, name: &str) -> Result<&ParamEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.entry(name)?.value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.entry(name)?.grad)
    }

    pub fn set_value(&mut self, name: &str, mut value: Tensor) -> Result<()> {
        let precision = self.precision;
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        if entry.value.shape() != value.shape() {
            return Err(Error::shape(
                format!("set_value({name})"),
                format!("expected {:?}, got {:?}", entry.value.shape(), value.shape()),
            ));
        }
        if precision == Precision::F32 {
            value.round_to_f32();
        }
        entry.value = value;
        Ok(())
    }

    /// Add `delta` to a single value, bypassing precision rounding.
    /// Used by the finite-difference checker, which requires F64 mode.
    pub fn nudge(&mut self, name: &str, index: usize, delta: f64) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        entry.value.data_mut()[index] += delta;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamEntry)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across parameters matching a prefix.
    pub fn count_values(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, e)| e.value.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for entry in self.entries.values_mut() {
            entry.grad.fill(0.0);
        }
    }

    /// Accumulate `scale * buffer` into the gradient accumulators.
    pub fn accumulate_grads(&mut self, buffer: &GradBuffer, scale: f64) {
        for (name, grad) in buffer.iter() {
            if let Some(entry) = self.entries.get_mut(name) {
                let dst = entry.grad.data_mut();
                for (d, s) in dst.iter_mut().zip(grad.data()) {
                    *d += scale * s;
                }
            }
        }
    }

    /// Snapshot of all values, for best-epoch bookkeeping.
    pub fn snapshot(&self) -> BTreeMap<String, Tensor> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &BTreeMap<String, Tensor>) {
        for (name, value) in snapshot {
            if let Some(entry) = self.entries.get_mut(name) {
                entry.value = value.clone();
            }
        }
    }
}

/// Per-example (or per-chunk) gradients keyed by parameter name.
#[derive(Debug, Clone, Default)]
pub struct GradBuffer {
    grads: BTreeMap<String, Tensor>,
}

impl GradBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, name: &str, shape: &[usize], values: &[f64]) {
        let t = self
            .grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(shape.to_vec()));
        let dst = t.data_mut();
        for (d, s) in dst.iter_mut().zip(values) {
            *d += s;
        }
    }

    pub fn add_assign(&mut self, other: &GradBuffer) {
        for (name, grad) in &other.grads {
            self.accumulate(name, grad.shape(), grad.data());
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
