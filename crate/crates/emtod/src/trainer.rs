//! End-to-end training of the intent model with early stopping, freeze
//! control, and checkpointing.
//!
//! Summaries are fixed during training (the stage-1 summarizer is frozen),
//! so every prediction point is tokenized once up front. Batch gradients
//! run over fixed-size example chunks in parallel and combine in chunk
//! order, which keeps results bitwise identical for any worker count.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::ActionTable;
use crate::aggregator::IntentPrediction;
use crate::context::{build_context, serialize_context, serialize_turn, AgentSummarizer, UserSummarizer};
use crate::corpus::intents::multi_hot;
use crate::corpus::schema::{Dialogue, Role};
use crate::error::{Error, Result};
use crate::eval::metrics::compute_metrics;
use crate::model::{AgentSummarizerKind, EmtodModel, EncodedExample, ModelKind, UserSummarizerKind};
use crate::nn::{Adam, Checkpoint, GradBuffer, ParamStore, Precision, Tape};
use crate::scopeit::ScopeIt;

const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub freeze: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 30,
            patience: 3,
            seed: 42,
            freeze: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "lr, batch_size, and max_epochs must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
    pub val_micro_precision: f64,
    pub val_macro_precision: f64,
    pub val_accuracy: f64,
}

fn summarizers<'a>(
    model: &EmtodModel,
    scopeit: Option<(&'a ScopeIt, &'a ParamStore)>,
    table: &'a ActionTable,
) -> Result<(UserSummarizer<'a>, AgentSummarizer<'a>)> {
    let user_summarizer = match model.config.user_summarizer {
        UserSummarizerKind::None => UserSummarizer::Full,
        UserSummarizerKind::Scopeit => {
            let (m, s) = scopeit.ok_or_else(|| {
                Error::Train(
                    "model is configured with the sentence summarizer but no stage-1 checkpoint was provided".to_string(),
                )
            })?;
            UserSummarizer::ScopeIt { model: m, store: s }
        }
    };
    let agent_summarizer = match model.config.agent_summarizer {
        AgentSummarizerKind::None => AgentSummarizer::Full,
        AgentSummarizerKind::Truncate => AgentSummarizer::Truncate { max_tokens: model.config.trunc_len },
        AgentSummarizerKind::ActionTags => AgentSummarizer::ActionTags { table },
    };
    Ok((user_summarizer, agent_summarizer))
}

/// One prediction point: the dialogue's turns through user turn `ti`.
fn encode_point(
    d: &Dialogue,
    ti: usize,
    model: &EmtodModel,
    user_summarizer: &UserSummarizer,
    agent_summarizer: &AgentSummarizer,
) -> Result<EncodedExample> {
    let turn = &d.turns[ti];
    let gold = turn
        .gold_intents
        .as_ref()
        .ok_or_else(|| Error::Corpus(format!("{}: user turn {ti} is unlabeled", d.id)))?;
    let targets = multi_hot(gold)
        .ok_or_else(|| Error::Corpus(format!("{}: unknown intent in turn {ti}", d.id)))?;

    // Turn-only models never read history, so only the final turn is
    // summarized.
    let prefix = if model.config.kind == ModelKind::TurnOnly {
        &d.turns[ti..=ti]
    } else {
        &d.turns[..=ti]
    };
    let ctx = build_context(prefix, model.space.vocab(), user_summarizer, agent_summarizer)?;

    let dialogue_ids = if model.config.uses_dialogue_encoder() {
        serialize_context(&ctx, &model.space, model.config.dialogue_encoder.max_len)?
    } else {
        Vec::new()
    };
    let turn_ids = if model.config.uses_turn_encoder() {
        serialize_turn(&ctx.last_user_turn, &model.space, model.config.turn_encoder.max_len)?
    } else {
        Vec::new()
    };
    Ok(EncodedExample { dialogue_ids, turn_ids, targets, ambiguous: turn.is_ambiguous() })
}

/// Tokenize every prediction point of every dialogue under the model's
/// summarization settings. The stage-1 summarizer (when used) must come
/// with its trained parameter store.
pub fn encode_examples(
    dialogues: &[Dialogue],
    model: &EmtodModel,
    scopeit: Option<(&ScopeIt, &ParamStore)>,
    table: &ActionTable,
) -> Result<Vec<EncodedExample>> {
    let (user_summarizer, agent_summarizer) = summarizers(model, scopeit, table)?;
    let per_dialogue: Vec<Vec<EncodedExample>> = dialogues
        .par_iter()
        .map(|d| {
            d.user_turn_indices()
                .into_iter()
                .map(|ti| encode_point(d, ti, model, &user_summarizer, &agent_summarizer))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_dialogue.into_concat())
}

trait IntoConcat<T> {
    fn into_concat(self) -> Vec<T>;
}

impl<T> IntoConcat<T> for Vec<Vec<T>> {
    fn into_concat(self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.iter().map(Vec::len).sum());
        for v in self {
            out.extend(v);
        }
        out
    }
}

/// Train from fresh init; returns the best-validation parameter store and
/// the per-epoch log.
pub fn train(
    model: &EmtodModel,
    train_examples: &[EncodedExample],
    val_examples: &[EncodedExample],
    tc: &TrainConfig,
) -> Result<(ParamStore, Vec<EpochLog>)> {
    tc.validate()?;
    if train_examples.is_empty() || val_examples.is_empty() {
        return Err(Error::Train("training and validation sets must be non-empty".to_string()));
    }
    let mut store = ParamStore::new(Precision::F32);
    model.register(&mut store, tc.seed)?;
    for prefix in &tc.freeze {
        if !store.names().any(|n| n.starts_with(prefix.as_str())) {
            return Err(Error::Config(format!(
                "freeze prefix `{prefix}` matches no registered parameter namespace"
            )));
        }
    }

    let mut adam = Adam::new(tc.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x927_2d1f_44aa);

    let mut logs: Vec<EpochLog> = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_snapshot = store.snapshot();
    let mut epochs_since_best = 0usize;

    for epoch in 1..=tc.max_epochs {
        let mut order: Vec<usize> = (0..train_examples.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let results: Vec<(GradBuffer, f64)> = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut buf = GradBuffer::new();
                    let mut chunk_loss = 0.0;
                    for &idx in chunk {
                        let mut tape = Tape::new();
                        let loss = model.loss(&mut tape, &store, &train_examples[idx])?;
                        chunk_loss += tape.value(loss).item();
                        tape.backward(loss, 1.0, &mut buf)?;
                    }
                    Ok((buf, chunk_loss))
                })
                .collect::<Result<_>>()?;
            for (buf, chunk_loss) in &results {
                store.accumulate_grads(buf, 1.0 / batch.len() as f64);
                loss_sum += chunk_loss;
            }
            adam.step(&mut store, &tc.freeze);
        }

        let val_preds = predict_all(model, &store, val_examples)?;
        let gold: Vec<Vec<f64>> = val_examples.iter().map(|e| e.targets.clone()).collect();
        let pred: Vec<Vec<f64>> = val_preds.iter().map(|p| p.multi_hot()).collect();
        let val = compute_metrics(&pred, &gold)?;

        logs.push(EpochLog {
            epoch,
            train_loss: loss_sum / train_examples.len() as f64,
            val_micro_f1: val.micro_f1,
            val_macro_f1: val.macro_f1,
            val_micro_precision: val.micro_precision,
            val_macro_precision: val.macro_precision,
            val_accuracy: val.accuracy,
        });

        if val.micro_f1 > best_f1 {
            best_f1 = val.micro_f1;
            best_snapshot = store.snapshot();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        if epochs_since_best >= tc.patience {
            break;
        }
    }
    store.restore(&best_snapshot);
    Ok((store, logs))
}

/// Deterministic batched inference in example order.
pub fn predict_all(
    model: &EmtodModel,
    store: &ParamStore,
    examples: &[EncodedExample],
) -> Result<Vec<IntentPrediction>> {
    let chunks: Vec<Vec<IntentPrediction>> = examples
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| chunk.iter().map(|ex| model.predict(store, ex)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    Ok(chunks.into_concat())
}

/// Tokenize only the final prediction point of a dialogue: the prefix up
/// to its last user turn, as one example.
pub fn encode_last_point(
    dialogue: &Dialogue,
    model: &EmtodModel,
    scopeit: Option<(&ScopeIt, &ParamStore)>,
    table: &ActionTable,
) -> Result<EncodedExample> {
    let last_user = dialogue
        .turns
        .iter()
        .rposition(|t| t.role == Role::User)
        .ok_or_else(|| Error::Corpus(format!("{}: no user turn to classify", dialogue.id)))?;
    let (user_summarizer, agent_summarizer) = summarizers(model, scopeit, table)?;
    encode_point(dialogue, last_user, model, &user_summarizer, &agent_summarizer)
}

/// Predict the intents of the final user turn of a dialogue prefix.
pub fn predict_dialogue(
    model: &EmtodModel,
    store: &ParamStore,
    scopeit: Option<(&ScopeIt, &ParamStore)>,
    table: &ActionTable,
    dialogue: &Dialogue,
) -> Result<IntentPrediction> {
    let example = encode_last_point(dialogue, model, scopeit, table)?;
    model.predict(store, &example)
}

pub fn save_model(path: &Path, model: &EmtodModel, store: &ParamStore) -> Result<()> {
    Checkpoint::from_store(store, model.digest()).save(path)
}

/// Load a checkpoint into a fresh store, refusing digest or shape
/// mismatches.
pub fn load_model(path: &Path, model: &EmtodModel) -> Result<ParamStore> {
    let checkpoint = Checkpoint::load(path)?;
    checkpoint.expect_digest(&model.digest())?;
    let mut store = ParamStore::new(Precision::F32);
    model.register(&mut store, 0)?;
    checkpoint.apply(&mut store)?;
    Ok(store)
}

pub fn write_log_jsonl(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut body = String::new();
    for log in logs {
        body.push_str(&serde_json::to_string(log).map_err(|e| Error::Train(e.to_string()))?);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}
