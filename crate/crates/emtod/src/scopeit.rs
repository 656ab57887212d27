//! Sentence-relevance summarizer for user turns.
//!
//! A hierarchical extractive model: word embeddings feed a forward and a
//! backward recurrence inside each sentence, the two end states form the
//! sentence vector, a second bidirectional recurrence contextualizes the
//! sentence vectors across the email, and a linear projection plus sigmoid
//! scores each sentence. Sentences scoring at or above τ are kept; when
//! nothing clears τ the single best sentence is kept so downstream encoders
//! always see input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::schema::{Dialogue, Role, Sentence, Turn};
use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};
use crate::nn::{Adam, Embedding, GradBuffer, GruCell, Linear, NodeId, ParamStore, Precision, Tape, Tensor};

pub const NAMESPACE: &str = "scopeit.";
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScopeItConfig {
    pub d_embed: usize,
    pub d_word_hidden: usize,
    pub d_sent_hidden: usize,
    pub tau: f64,
}

impl Default for ScopeItConfig {
    fn default() -> Self {
        Self { d_embed: 64, d_word_hidden: 64, d_sent_hidden: 64, tau: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct ScopeIt {
    pub config: ScopeItConfig,
    vocab_size: usize,
    embedding: Embedding,
    word_fwd: GruCell,
    word_bwd: GruCell,
    sent_fwd: GruCell,
    sent_bwd: GruCell,
    proj: Linear,
}

/// Intra-sentence encoding: per-word embeddings, both recurrence tracks,
/// and the concatenated sentence vector.
#[derive(Debug, Clone)]
pub struct SentenceEncoding {
    pub word_embeddings: Tensor,
    pub forward_states: Tensor,
    pub backward_states: Tensor,
    pub sentence_vector: Tensor,
}

/// Inter-sentence scores for one turn.
#[derive(Debug, Clone)]
pub struct RelevanceScores {
    pub contextualized: Tensor,
    pub probs: Vec<f64>,
    pub tau: f64,
}

impl ScopeIt {
    pub fn new(config: ScopeItConfig, vocab_size: usize) -> Self {
        let d_e = config.d_embed;
        let d_w = config.d_word_hidden;
        let d_s = config.d_sent_hidden;
        Self {
            embedding: Embedding::new("scopeit.embed", vocab_size, d_e),
            word_fwd: GruCell::new("scopeit.word_fwd", d_e, d_w),
            word_bwd: GruCell::new("scopeit.word_bwd", d_e, d_w),
            sent_fwd: GruCell::new("scopeit.sent_fwd", 2 * d_w, d_s),
            sent_bwd: GruCell::new("scopeit.sent_bwd", 2 * d_w, d_s),
            proj: Linear::new("scopeit.proj", 2 * d_s, 1),
            config,
            vocab_size,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn register(&self, store: &mut ParamStore, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.embedding.register(store, &mut rng)?;
        self.word_fwd.register(store, &mut rng)?;
        self.word_bwd.register(store, &mut rng)?;
        self.sent_fwd.register(store, &mut rng)?;
        self.sent_bwd.register(store, &mut rng)?;
        self.proj.register(store, &mut rng)?;
        Ok(())
    }

    /// Sentence vector node: concat(last forward state, backward state at
    /// the first position).
    fn sentence_vector_node(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        token_ids: &[usize],
    ) -> Result<NodeId> {
        if token_ids.is_empty() {
            return Err(Error::Corpus("cannot encode an empty sentence".to_string()));
        }
        let embedded = self.embedding.lookup(tape, store, token_ids)?;
        let rows: Vec<NodeId> = (0..token_ids.len())
            .map(|i| tape.row(embedded, i))
            .collect::<Result<_>>()?;
        let fwd = self.word_fwd.run(tape, store, &rows)?;
        let rev: Vec<NodeId> = rows.iter().rev().copied().collect();
        let bwd = self.word_bwd.run(tape, store, &rev)?;
        tape.concat(&[*fwd.last().unwrap(), *bwd.last().unwrap()])
    }

    /// Per-sentence relevance probabilities node, shape [m, 1].
    fn probs_node(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        sentences: &[Vec<usize>],
    ) -> Result<NodeId> {
        if sentences.is_empty() {
            return Err(Error::Corpus("turn has no sentences to score".to_string()));
        }
        let vectors: Vec<NodeId> = sentences
            .iter()
            .map(|ids| self.sentence_vector_node(tape, store, ids))
            .collect::<Result<_>>()?;
        let contextual = self.contextualize(tape, store, &vectors)?;
        let logits = self.proj.forward(tape, store, contextual)?;
        Ok(tape.sigmoid(logits))
    }

    fn contextualize(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        vectors: &[NodeId],
    ) -> Result<NodeId> {
        let fwd = self.sent_fwd.run(tape, store, vectors)?;
        let rev: Vec<NodeId> = vectors.iter().rev().copied().collect();
        let bwd = self.sent_bwd.run(tape, store, &rev)?;
        let m = vectors.len();
        let combined: Vec<NodeId> = (0..m)
            .map(|i| tape.concat(&[fwd[i], bwd[m - 1 - i]]))
            .collect::<Result<_>>()?;
        tape.stack_rows(&combined)
    }

    /// Intra-sentence stage only; depends on nothing outside the sentence.
    pub fn encode_sentence(
        &self,
        store: &ParamStore,
        token_ids: &[usize],
    ) -> Result<SentenceEncoding> {
        if token_ids.is_empty() {
            return Err(Error::Corpus("cannot encode an empty sentence".to_string()));
        }
        let mut tape = Tape::new();
        let embedded = self.embedding.lookup(&mut tape, store, token_ids)?;
        let rows: Vec<NodeId> = (0..token_ids.len())
            .map(|i| tape.row(embedded, i))
            .collect::<Result<_>>()?;
        let fwd = self.word_fwd.run(&mut tape, store, &rows)?;
        let rev: Vec<NodeId> = rows.iter().rev().copied().collect();
        let bwd_rev = self.word_bwd.run(&mut tape, store, &rev)?;

        let fwd_mat = tape.stack_rows(&fwd)?;
        // re-order backward states to original positions
        let bwd_original: Vec<NodeId> = (0..token_ids.len())
            .map(|i| bwd_rev[token_ids.len() - 1 - i])
            .collect();
        let bwd_mat = tape.stack_rows(&bwd_original)?;
        let sentence = tape.concat(&[*fwd.last().unwrap(), *bwd_rev.last().unwrap()])?;

        Ok(SentenceEncoding {
            word_embeddings: tape.value(embedded).clone(),
            forward_states: tape.value(fwd_mat).clone(),
            backward_states: tape.value(bwd_mat).clone(),
            sentence_vector: tape.value(sentence).clone(),
        })
    }

    /// Inter-sentence stage over a whole turn.
    pub fn score_turn(&self, store: &ParamStore, sentences: &[Vec<usize>]) -> Result<RelevanceScores> {
        let mut tape = Tape::new();
        let vectors: Vec<NodeId> = sentences
            .iter()
            .map(|ids| self.sentence_vector_node(&mut tape, store, ids))
            .collect::<Result<_>>()?;
        let contextual = self.contextualize(&mut tape, store, &vectors)?;
        let logits = self.proj.forward(&mut tape, store, contextual)?;
        let probs_node = tape.sigmoid(logits);
        Ok(RelevanceScores {
            contextualized: tape.value(contextual).clone(),
            probs: tape.value(probs_node).data().to_vec(),
            tau: self.config.tau,
        })
    }

    /// Filtered sentence texts of a user turn, joined for downstream use.
    pub fn summarize_turn(&self, store: &ParamStore, vocab: &Vocab, turn: &Turn) -> Result<String> {
        let ids: Vec<Vec<usize>> = turn.sentences.iter().map(|s| vocab.encode(&s.text)).collect();
        let scores = self.score_turn(store, &ids)?;
        let kept = filter_by_threshold(&turn.sentences, &scores.probs, self.config.tau);
        Ok(kept
            .iter()
            .map(|&i| turn.sentences[i].text.as_str())
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Keep sentences with p >= τ in original order; fall back to the single
/// argmax sentence when none clear the threshold. Returns indices.
pub fn filter_by_threshold(sentences: &[Sentence], probs: &[f64], tau: f64) -> Vec<usize> {
    debug_assert_eq!(sentences.len(), probs.len());
    let kept: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= tau)
        .map(|(i, _)| i)
        .collect();
    if !kept.is_empty() {
        return kept;
    }
    let argmax = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    vec![argmax]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScopeItTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ScopeItTrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch_size: 32, max_epochs: 10, patience: 3, seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScopeItEpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
}

struct TurnExample {
    sentences: Vec<Vec<usize>>,
    labels: Vec<f64>,
}

fn turn_examples(dialogues: &[Dialogue], vocab: &Vocab) -> Result<Vec<TurnExample>> {
    let mut out = Vec::new();
    let mut any_label = false;
    for d in dialogues {
        for t in d.turns.iter().filter(|t| t.role == Role::User) {
            let sentences: Vec<Vec<usize>> =
                t.sentences.iter().map(|s| vocab.encode(&s.text)).collect();
            let labels: Vec<f64> = t
                .sentences
                .iter()
                .map(|s| {
                    if !s.relevant {
                        any_label = true;
                    }
                    if s.relevant {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push(TurnExample { sentences, labels });
        }
    }
    if out.is_empty() {
        return Err(Error::Corpus("no user turns with relevance labels".to_string()));
    }
    let _ = any_label;
    Ok(out)
}

/// Stage-1 training: mean per-sentence binary cross entropy, early stopping
/// on validation sentence F1. Returns the trained store and per-epoch logs.
pub fn train_scopeit(
    model: &ScopeIt,
    train: &[Dialogue],
    val: &[Dialogue],
    vocab: &Vocab,
    tc: &ScopeItTrainConfig,
) -> Result<(ParamStore, Vec<ScopeItEpochLog>)> {
    let mut store = ParamStore::new(Precision::F32);
    model.register(&mut store, tc.seed)?;

    let train_examples = turn_examples(train, vocab)?;
    let val_examples = turn_examples(val, vocab)?;
    let mut adam = Adam::new(tc.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5c0_9e17);

    let mut logs = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_snapshot = store.snapshot();
    let mut epochs_since_best = 0usize;

    for epoch in 1..=tc.max_epochs {
        let mut order: Vec<usize> = (0..train_examples.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for batch in order.chunks(tc.batch_size.max(1)) {
            let results: Vec<(GradBuffer, f64)> = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut buf = GradBuffer::new();
                    let mut chunk_loss = 0.0;
                    for &idx in chunk {
                        let ex = &train_examples[idx];
                        let mut tape = Tape::new();
                        let probs = model.probs_node(&mut tape, &store, &ex.sentences)?;
                        let targets =
                            Tensor::new(vec![ex.labels.len(), 1], ex.labels.clone())?;
                        let loss = tape.bce_mean(probs, targets)?;
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
            loss_count += batch.len();
            adam.step(&mut store, &[]);
        }

        let val_f1 = sentence_f1(model, &store, &val_examples)?;
        logs.push(ScopeItEpochLog {
            epoch,
            train_loss: loss_sum / loss_count.max(1) as f64,
            val_f1,
        });
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_snapshot = store.snapshot();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best > tc.patience {
                break;
            }
        }
    }
    store.restore(&best_snapshot);
    Ok((store, logs))
}

/// Binary F1 of the relevant class at threshold 0.5, pooled over sentences.
pub fn sentence_f1_on(
    model: &ScopeIt,
    store: &ParamStore,
    dialogues: &[Dialogue],
    vocab: &Vocab,
) -> Result<f64> {
    sentence_f1(model, store, &turn_examples(dialogues, vocab)?)
}

fn sentence_f1(model: &ScopeIt, store: &ParamStore, examples: &[TurnExample]) -> Result<f64> {
    let counts: Vec<(usize, usize, usize)> = examples
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fal_n = 0usize;
            for ex in chunk {
                let scores = model.score_turn(store, &ex.sentences)?;
                for (p, y) in scores.probs.iter().zip(&ex.labels) {
                    let pred = *p >= 0.5;
                    let gold = *y > 0.5;
                    match (pred, gold) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fal_n += 1,
                        (false, false) => {}
                    }
                }
            }
            Ok((tp, fp, fal_n))
        })
        .collect::<Result<_>>()?;
    let (tp, fp, fal_n) = counts
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let denom = 2 * tp + fp + fal_n;
    Ok(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}
