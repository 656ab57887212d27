//! Multi-label classification metrics.
//!
//! micro-P/R/F1 pool true/false positives over all (example, intent)
//! pairs; macro averages per-intent values uniformly with zero-support
//! intents contributing 0 so the denominator is always 13; accuracy is
//! exact set match. 0/0 ratios are 0 by convention.

use serde::Serialize;

use crate::corpus::intents::{INTENTS, N_INTENTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PerIntentMetrics {
    pub intent: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub macro_precision: f64,
    pub accuracy: f64,
    pub micro_recall: f64,
    pub macro_recall: f64,
    pub n_examples: usize,
    pub accuracy_definition: &'static str,
    pub per_intent: Vec<PerIntentMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(predictions: &[Vec<f64>], gold: &[Vec<f64>]) -> Result<MetricsReport> {
    if predictions.len() != gold.len() {
        return Err(Error::shape(
            "compute_metrics",
            format!("{} predictions vs {} gold rows", predictions.len(), gold.len()),
        ));
    }
    let mut tp = vec![0usize; N_INTENTS];
    let mut fp = vec![0usize; N_INTENTS];
    let mut fn_ = vec![0usize; N_INTENTS];
    let mut exact = 0usize;

    for (p, g) in predictions.iter().zip(gold) {
        if p.len() != N_INTENTS || g.len() != N_INTENTS {
            return Err(Error::shape(
                "compute_metrics",
                format!("vectors must have {N_INTENTS} entries"),
            ));
        }
        let mut all_match = true;
        for i in 0..N_INTENTS {
            let pi = p[i] > 0.5;
            let gi = g[i] > 0.5;
            match (pi, gi) {
                (true, true) => tp[i] += 1,
                (true, false) => fp[i] += 1,
                (false, true) => fn_[i] += 1,
                (false, false) => {}
            }
            all_match &= pi == gi;
        }
        if all_match {
            exact += 1;
        }
    }

    let per_intent: Vec<PerIntentMetrics> = (0..N_INTENTS)
        .map(|i| {
            let precision = ratio(tp[i], tp[i] + fp[i]);
            let recall = ratio(tp[i], tp[i] + fn_[i]);
            PerIntentMetrics {
                intent: INTENTS[i].to_string(),
                tp: tp[i],
                fp: fp[i],
                fn_: fn_[i],
                support: tp[i] + fn_[i],
                precision,
                recall,
                f1: f1(precision, recall),
            }
        })
        .collect();

    let tp_sum: usize = tp.iter().sum();
    let fp_sum: usize = fp.iter().sum();
    let fn_sum: usize = fn_.iter().sum();
    let micro_precision = ratio(tp_sum, tp_sum + fp_sum);
    let micro_recall = ratio(tp_sum, tp_sum + fn_sum);

    Ok(MetricsReport {
        micro_f1: f1(micro_precision, micro_recall),
        macro_f1: per_intent.iter().map(|m| m.f1).sum::<f64>() / N_INTENTS as f64,
        micro_precision,
        macro_precision: per_intent.iter().map(|m| m.precision).sum::<f64>() / N_INTENTS as f64,
        accuracy: ratio(exact, predictions.len()),
        micro_recall,
        macro_recall: per_intent.iter().map(|m| m.recall).sum::<f64>() / N_INTENTS as f64,
        n_examples: predictions.len(),
        accuracy_definition: "exact_match",
        per_intent,
    })
}
