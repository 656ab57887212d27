//! Ablation grids: train and evaluate a list of configurations across
//! seeds, reporting per-cell means.

use serde::{Deserialize, Serialize};

use crate::agent::ActionTable;
use crate::corpus::schema::Dialogue;
use crate::corpus::vocab::Vocab;
use crate::error::Result;
use crate::eval::metrics::compute_metrics;
use crate::model::{AgentSummarizerKind, EmtodModel, ModelConfig, ModelKind, UserSummarizerKind};
use crate::nn::ParamStore;
use crate::scopeit::ScopeIt;
use crate::trainer::{encode_examples, predict_all, train, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub name: String,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub macro_precision: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<MetricSummary>,
    pub mean: MetricSummary,
    /// Same metrics restricted to ambiguous prediction points.
    pub mean_ambiguous_micro_f1: f64,
}

/// Train and evaluate each grid entry for each seed; cells are arithmetic
/// means over seeds.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    grid: &[GridEntry],
    train_dialogues: &[Dialogue],
    val_dialogues: &[Dialogue],
    test_dialogues: &[Dialogue],
    vocab: &Vocab,
    scopeit: Option<(&ScopeIt, &ParamStore)>,
    table: &ActionTable,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for entry in grid {
        let model = EmtodModel::new(entry.model.clone(), vocab.clone())?;
        let train_examples = encode_examples(train_dialogues, &model, scopeit, table)?;
        let val_examples = encode_examples(val_dialogues, &model, scopeit, table)?;
        let test_examples = encode_examples(test_dialogues, &model, scopeit, table)?;

        let mut per_seed = Vec::with_capacity(seeds.len());
        let mut amb_f1_sum = 0.0;
        for &seed in seeds {
            let tc = TrainConfig { seed, ..entry.train.clone() };
            let (store, _logs) = train(&model, &train_examples, &val_examples, &tc)?;
            let preds = predict_all(&model, &store, &test_examples)?;
            let pred_hot: Vec<Vec<f64>> = preds.iter().map(|p| p.multi_hot()).collect();
            let gold: Vec<Vec<f64>> = test_examples.iter().map(|e| e.targets.clone()).collect();
            let report = compute_metrics(&pred_hot, &gold)?;
            per_seed.push(MetricSummary {
                micro_f1: report.micro_f1,
                macro_f1: report.macro_f1,
                micro_precision: report.micro_precision,
                macro_precision: report.macro_precision,
                accuracy: report.accuracy,
            });

            let amb_pred: Vec<Vec<f64>> = test_examples
                .iter()
                .zip(&pred_hot)
                .filter(|(e, _)| e.ambiguous)
                .map(|(_, p)| p.clone())
                .collect();
            let amb_gold: Vec<Vec<f64>> = test_examples
                .iter()
                .filter(|e| e.ambiguous)
                .map(|e| e.targets.clone())
                .collect();
            if !amb_gold.is_empty() {
                amb_f1_sum += compute_metrics(&amb_pred, &amb_gold)?.micro_f1;
            }
        }

        let n = seeds.len().max(1) as f64;
        let mean = MetricSummary {
            micro_f1: per_seed.iter().map(|m| m.micro_f1).sum::<f64>() / n,
            macro_f1: per_seed.iter().map(|m| m.macro_f1).sum::<f64>() / n,
            micro_precision: per_seed.iter().map(|m| m.micro_precision).sum::<f64>() / n,
            macro_precision: per_seed.iter().map(|m| m.macro_precision).sum::<f64>() / n,
            accuracy: per_seed.iter().map(|m| m.accuracy).sum::<f64>() / n,
        };
        rows.push(AblationRow {
            name: entry.name.clone(),
            seeds: seeds.to_vec(),
            per_seed,
            mean,
            mean_ambiguous_micro_f1: amb_f1_sum / n,
        });
    }
    Ok(rows)
}

fn describe(config: &ModelConfig) -> (String, String, String, String, String) {
    let arch = |cfg: &crate::context::EncoderConfig| match cfg.arch {
        crate::context::EncoderArch::SelfAttention => "self-attn",
        crate::context::EncoderArch::Recurrent => "recurrent",
    };
    let dialogue = if config.uses_dialogue_encoder() {
        arch(&config.dialogue_encoder).to_string()
    } else {
        "-".to_string()
    };
    let email = if config.uses_turn_encoder() {
        arch(&config.turn_encoder).to_string()
    } else {
        "-".to_string()
    };
    let aggregator = if config.kind == ModelKind::Dual {
        config.aggregator.to_string()
    } else {
        "-".to_string()
    };
    let user = match config.user_summarizer {
        UserSummarizerKind::Scopeit => "scopeit".to_string(),
        UserSummarizerKind::None => "-".to_string(),
    };
    let agent = match config.agent_summarizer {
        AgentSummarizerKind::ActionTags => "summar.".to_string(),
        AgentSummarizerKind::Truncate => "trunc.".to_string(),
        AgentSummarizerKind::None => "-".to_string(),
    };
    (dialogue, email, aggregator, user, agent)
}

/// Plain-text table with the metric columns in the canonical order:
/// micro-F1, macro-F1, micro-P, macro-P, acc.
pub fn format_table(grid: &[GridEntry], rows: &[AblationRow]) -> String {
    let mut lines = Vec::with_capacity(rows.len() + 2);
    lines.push(format!(
        "{:<24} {:<10} {:<10} {:<16} {:<8} {:<8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "name", "dialogue", "email", "aggregator", "user", "agent",
        "micro-F1", "macro-F1", "micro-P", "macro-P", "acc."
    ));
    lines.push("-".repeat(124));
    for (entry, row) in grid.iter().zip(rows) {
        let (dialogue, email, aggregator, user, agent) = describe(&entry.model);
        lines.push(format!(
            "{:<24} {:<10} {:<10} {:<16} {:<8} {:<8} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            row.name, dialogue, email, aggregator, user, agent,
            row.mean.micro_f1,
            row.mean.macro_f1,
            row.mean.micro_precision,
            row.mean.macro_precision,
            row.mean.accuracy,
        ));
    }
    lines.join("\n") + "\n"
}
