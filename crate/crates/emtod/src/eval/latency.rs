//! Batch-1 inference latency: tokenization plus a forward pass, two
//! warmup runs excluded, ten timed runs averaged.

use std::time::Instant;

use serde::Serialize;

use crate::agent::ActionTable;
use crate::corpus::schema::Dialogue;
use crate::corpus::vocab::Vocab;
use crate::error::Result;
use crate::model::{ComponentCounts, EmtodModel, ModelConfig};
use crate::nn::{ParamStore, Precision};
use crate::scopeit::ScopeIt;
use crate::trainer::encode_last_point;

pub const WARMUP_RUNS: usize = 2;
pub const TIMED_RUNS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigLatency {
    pub name: String,
    pub params: ComponentCounts,
    pub runs_s: Vec<f64>,
    pub mean_s: f64,
    pub warmup_runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub configs: Vec<ConfigLatency>,
}

/// Measure each configuration on the same sample dialogue. Latency must be
/// read on an otherwise idle process; the measured path is single-threaded.
pub fn benchmark_latency(
    entries: &[(String, ModelConfig)],
    vocab: &Vocab,
    sample: &Dialogue,
    scopeit: Option<(&ScopeIt, &ParamStore)>,
    table: &ActionTable,
    seed: u64,
) -> Result<LatencyReport> {
    let mut configs = Vec::with_capacity(entries.len());
    for (name, model_config) in entries {
        let model = EmtodModel::new(model_config.clone(), vocab.clone())?;
        let mut store = ParamStore::new(Precision::F32);
        model.register(&mut store, seed)?;

        let run_once = || -> Result<f64> {
            let start = Instant::now();
            let example = encode_last_point(sample, &model, scopeit, table)?;
            let prediction = model.predict(&store, &example)?;
            std::hint::black_box(&prediction);
            Ok(start.elapsed().as_secs_f64())
        };

        for _ in 0..WARMUP_RUNS {
            run_once()?;
        }
        let mut runs_s = Vec::with_capacity(TIMED_RUNS);
        for _ in 0..TIMED_RUNS {
            runs_s.push(run_once()?);
        }
        let mean_s = runs_s.iter().sum::<f64>() / runs_s.len() as f64;
        configs.push(ConfigLatency {
            name: name.clone(),
            params: model.param_counts(&store),
            runs_s,
            mean_s,
            warmup_runs: WARMUP_RUNS,
        });
    }
    Ok(LatencyReport { configs })
}
