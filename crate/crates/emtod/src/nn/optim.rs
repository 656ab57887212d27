//! Adam with bias-corrected moments.

use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::{Precision, Tensor};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first_moment: BTreeMap<String, Tensor>,
    second_moment: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update in sorted-name order; parameters whose name starts with a
    /// frozen prefix are skipped. All gradients are zeroed afterward.
    pub fn step(&mut self, store: &mut ParamStore, freeze: &[String]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let round = store.precision() == Precision::F32;

        for (name, entry) in store.iter_mut() {
            if freeze.iter().any(|p| name.starts_with(p.as_str())) {
                continue;
            }
            let m = self
                .first_moment
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(entry.value.shape().to_vec()));
            let v = self
                .second_moment
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(entry.value.shape().to_vec()));
            let g = entry.grad.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = entry.value.data_mut();
            for i in 0..g.len() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * g[i];
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                if round {
                    pd[i] = pd[i] as f32 as f64;
                }
            }
        }
        store.zero_grads();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::GradBuffer;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut store = ParamStore::new(Precision::F64);
        store.register("w", Tensor::vector(vec![1.5, -0.5])).unwrap();
        let mut adam = Adam::new(1e-3);
        adam.step(&mut store, &[]);
        assert_eq!(store.value("w").unwrap().data(), &[1.5, -0.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // constant gradient 1: m_hat = 1, v_hat = 1 -> delta ~ -lr
        let mut store = ParamStore::new(Precision::F64);
        store.register("w", Tensor::vector(vec![0.0])).unwrap();
        let mut buf = GradBuffer::new();
        buf.accumulate("w", &[1], &[1.0]);
        store.accumulate_grads(&buf, 1.0);
        let mut adam = Adam::new(1e-3);
        adam.step(&mut store, &[]);
        let w = store.value("w").unwrap().item();
        assert!((w + 1e-3).abs() < 1e-9, "w = {w}");
        // gradients were zeroed
        assert_eq!(store.grad("w").unwrap().data(), &[0.0]);
    }

    #[test]
    fn frozen_prefix_is_skipped() {
        let mut store = ParamStore::new(Precision::F64);
        store.register("enc.w", Tensor::vector(vec![1.0])).unwrap();
        store.register("head.w", Tensor::vector(vec![1.0])).unwrap();
        let mut buf = GradBuffer::new();
        buf.accumulate("enc.w", &[1], &[1.0]);
        buf.accumulate("head.w", &[1], &[1.0]);
        store.accumulate_grads(&buf, 1.0);
        let mut adam = Adam::new(0.1);
        adam.step(&mut store, &["enc.".to_string()]);
        assert_eq!(store.value("enc.w").unwrap().data(), &[1.0]);
        assert!(store.value("head.w").unwrap().item() < 1.0);
    }
}
