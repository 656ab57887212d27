//! The assembled intent model: encoders, fusion, and head, with config
//! digests and per-component parameter counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregator::{
    fuse_attention, fuse_concat, fuse_cross_attention, AggregatorKind, ClassifierHead,
    IntentPrediction,
};
use crate::context::{Encoder, EncoderArch, EncoderConfig, TokenSpace};
use crate::corpus::intents::N_INTENTS;
use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};
use crate::nn::{NodeId, ParamStore, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Encoder over the last user turn only; head on its CLS.
    TurnOnly,
    /// Encoder over the summarized history only; head on its CLS.
    DialogueOnly,
    /// Both encoders plus an aggregator.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSummarizerKind {
    None,
    Scopeit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentSummarizerKind {
    None,
    Truncate,
    ActionTags,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub aggregator: AggregatorKind,
    pub swap_attention_direction: bool,
    pub dialogue_encoder: EncoderConfig,
    pub turn_encoder: EncoderConfig,
    pub user_summarizer: UserSummarizerKind,
    pub agent_summarizer: AgentSummarizerKind,
    pub trunc_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Dual,
            aggregator: AggregatorKind::CrossAttention,
            swap_attention_direction: false,
            dialogue_encoder: EncoderConfig { max_len: 256, ..Default::default() },
            turn_encoder: EncoderConfig { max_len: 128, ..Default::default() },
            user_summarizer: UserSummarizerKind::Scopeit,
            agent_summarizer: AgentSummarizerKind::ActionTags,
            trunc_len: 20,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.dialogue_encoder.validate()?;
        self.turn_encoder.validate()?;
        if self.kind == ModelKind::Dual
            && self.dialogue_encoder.d_model != self.turn_encoder.d_model
        {
            return Err(Error::Config(format!(
                "attention requires equal encoder dims, got dialogue {} vs turn {}",
                self.dialogue_encoder.d_model, self.turn_encoder.d_model
            )));
        }
        if self.trunc_len == 0 {
            return Err(Error::Config("trunc_len must be at least 1".to_string()));
        }
        Ok(())
    }

    pub fn uses_dialogue_encoder(&self) -> bool {
        matches!(self.kind, ModelKind::DialogueOnly | ModelKind::Dual)
    }

    pub fn uses_turn_encoder(&self) -> bool {
        matches!(self.kind, ModelKind::TurnOnly | ModelKind::Dual)
    }

    fn head_input_dim(&self) -> usize {
        match self.kind {
            ModelKind::TurnOnly => self.turn_encoder.d_model,
            ModelKind::DialogueOnly => self.dialogue_encoder.d_model,
            ModelKind::Dual => self.aggregator.fused_dim(self.dialogue_encoder.d_model),
        }
    }
}

/// Pre-tokenized prediction point: one user turn with its context.
#[derive(Debug, Clone)]
pub struct EncodedExample {
    pub dialogue_ids: Vec<usize>,
    pub turn_ids: Vec<usize>,
    pub targets: Vec<f64>,
    pub ambiguous: bool,
}

pub struct EmtodModel {
    pub config: ModelConfig,
    pub space: TokenSpace,
    dialogue_encoder: Option<Encoder>,
    turn_encoder: Option<Encoder>,
    head: ClassifierHead,
}

impl EmtodModel {
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let space = TokenSpace::new(vocab);
        let dialogue_encoder = if config.uses_dialogue_encoder() {
            Some(Encoder::new("dialog", config.dialogue_encoder.clone(), space.size())?)
        } else {
            None
        };
        let turn_encoder = if config.uses_turn_encoder() {
            Some(Encoder::new("turn", config.turn_encoder.clone(), space.size())?)
        } else {
            None
        };
        let head = ClassifierHead::new(config.head_input_dim());
        Ok(Self { config, space, dialogue_encoder, turn_encoder, head })
    }

    pub fn register(&self, store: &mut ParamStore, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(enc) = &self.dialogue_encoder {
            enc.register(store, &mut rng)?;
        }
        if let Some(enc) = &self.turn_encoder {
            enc.register(store, &mut rng)?;
        }
        self.head.register(store, &mut rng)?;
        Ok(())
    }

    /// Probabilities node [13] for one example.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        example: &EncodedExample,
    ) -> Result<NodeId> {
        let fused = match self.config.kind {
            ModelKind::TurnOnly => {
                let enc = self.turn_encoder.as_ref().unwrap();
                enc.encode(tape, store, &example.turn_ids)?.cls
            }
            ModelKind::DialogueOnly => {
                let enc = self.dialogue_encoder.as_ref().unwrap();
                enc.encode(tape, store, &example.dialogue_ids)?.cls
            }
            ModelKind::Dual => {
                let dialog = self
                    .dialogue_encoder
                    .as_ref()
                    .unwrap()
                    .encode(tape, store, &example.dialogue_ids)?;
                let turn = self
                    .turn_encoder
                    .as_ref()
                    .unwrap()
                    .encode(tape, store, &example.turn_ids)?;
                let swap = self.config.swap_attention_direction;
                match self.config.aggregator {
                    AggregatorKind::Concat => fuse_concat(tape, &dialog, &turn)?.fused,
                    AggregatorKind::Attention => fuse_attention(tape, &dialog, &turn, swap)?.fused,
                    AggregatorKind::CrossAttention => {
                        fuse_cross_attention(tape, &dialog, &turn, swap)?.fused
                    }
                }
            }
        };
        self.head.forward(tape, store, fused)
    }

    /// Loss node for one example: BCE between probabilities and targets.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        example: &EncodedExample,
    ) -> Result<NodeId> {
        let probs = self.forward(tape, store, example)?;
        tape.bce_mean(probs, Tensor::vector(example.targets.clone()))
    }

    /// Value-level prediction.
    pub fn predict(&self, store: &ParamStore, example: &EncodedExample) -> Result<IntentPrediction> {
        let mut tape = Tape::new();
        let probs = self.forward(&mut tape, store, example)?;
        Ok(IntentPrediction::from_probs(tape.value(probs).data().to_vec()))
    }

    /// Digest binding a checkpoint to the model shape, summarization
    /// settings, and vocabulary content.
    pub fn digest(&self) -> [u8; 32] {
        let config_json = serde_json::to_string(&self.config).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(b"emtod-model-v1\n");
        hasher.update(config_json.as_bytes());
        hasher.update(b"\n");
        hasher.update(self.space.vocab().file_body().as_bytes());
        hasher.update(N_INTENTS.to_le_bytes());
        hasher.finalize().into()
    }

    pub fn namespaces(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.dialogue_encoder.is_some() {
            out.push("dialog.");
        }
        if self.turn_encoder.is_some() {
            out.push("turn.");
        }
        out.push("head.");
        out
    }

    /// Scalar parameter counts per component.
    pub fn param_counts(&self, store: &ParamStore) -> ComponentCounts {
        let dialogue = store.count_values("dialog.");
        let turn = store.count_values("turn.");
        let head = store.count_values("head.");
        ComponentCounts { dialogue, turn, head, total: dialogue + turn + head }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComponentCounts {
    pub dialogue: usize,
    pub turn: usize,
    pub head: usize,
    pub total: usize,
}

/// Digest for the stage-1 summarizer checkpoint.
pub fn scopeit_digest(config: &crate::scopeit::ScopeItConfig, vocab: &Vocab) -> [u8; 32] {
    let config_json = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(b"scopeit-v1\n");
    hasher.update(config_json.as_bytes());
    hasher.update(b"\n");
    hasher.update(vocab.file_body().as_bytes());
    hasher.finalize().into()
}

/// A tiny pipeline configuration for gradient checking and smoke tests.
pub fn tiny_model_config(arch: EncoderArch) -> ModelConfig {
    let enc = EncoderConfig { arch, d_model: 8, heads: 2, blocks: 1, ffn_mult: 2, max_len: 32 };
    ModelConfig {
        kind: ModelKind::Dual,
        aggregator: AggregatorKind::CrossAttention,
        swap_attention_direction: false,
        dialogue_encoder: enc.clone(),
        turn_encoder: enc,
        user_summarizer: UserSummarizerKind::Scopeit,
        agent_summarizer: AgentSummarizerKind::ActionTags,
        trunc_len: 20,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::schema::{Dialogue, Role, Sentence, Turn};
    use crate::nn::{grad_check, Precision};

    fn toy_vocab() -> Vocab {
        let d = Dialogue {
            id: "v".to_string(),
            turns: vec![Turn {
                role: Role::User,
                speaker_id: "u".to_string(),
                sentences: vec![Sentence {
                    text: "please set up a sync monday at noon works for me".to_string(),
                    relevant: true,
                }],
                gold_intents: Some(vec!["schedule_meeting".to_string()]),
                gold_action: None,
                ambiguous: Some(false),
            }],
        };
        Vocab::build(&[d], 1).unwrap()
    }

    fn example() -> EncodedExample {
        let mut targets = vec![0.0; N_INTENTS];
        targets[0] = 1.0;
        targets[9] = 1.0;
        EncodedExample {
            dialogue_ids: vec![2, 4, 6, 7, 5, 8, 6],
            turn_ids: vec![2, 9, 10, 11],
            targets,
            ambiguous: false,
        }
    }

    #[test]
    fn dual_model_requires_equal_dims() {
        let mut config = tiny_model_config(EncoderArch::SelfAttention);
        config.turn_encoder.d_model = 6;
        config.turn_encoder.heads = 2;
        assert!(EmtodModel::new(config, toy_vocab()).is_err());
    }

    #[test]
    fn forward_shapes_and_determinism() {
        for kind in [ModelKind::TurnOnly, ModelKind::DialogueOnly, ModelKind::Dual] {
            let mut config = tiny_model_config(EncoderArch::SelfAttention);
            config.kind = kind;
            let model = EmtodModel::new(config, toy_vocab()).unwrap();
            let mut store = ParamStore::new(Precision::F32);
            model.register(&mut store, 9).unwrap();
            let a = model.predict(&store, &example()).unwrap();
            let b = model.predict(&store, &example()).unwrap();
            assert_eq!(a.probabilities.len(), N_INTENTS);
            assert!(a
                .probabilities
                .iter()
                .zip(&b.probabilities)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(a.probabilities.iter().all(|p| p.is_finite() && *p > 0.0 && *p < 1.0));
        }
    }

    #[test]
    fn digest_changes_with_config_and_vocab() {
        let model = EmtodModel::new(tiny_model_config(EncoderArch::SelfAttention), toy_vocab()).unwrap();
        let mut other_config = tiny_model_config(EncoderArch::SelfAttention);
        other_config.aggregator = AggregatorKind::Concat;
        let other = EmtodModel::new(other_config, toy_vocab()).unwrap();
        assert_ne!(model.digest(), other.digest());
    }

    #[test]
    fn param_counts_are_additive() {
        let model = EmtodModel::new(tiny_model_config(EncoderArch::SelfAttention), toy_vocab()).unwrap();
        let mut store = ParamStore::new(Precision::F32);
        model.register(&mut store, 1).unwrap();
        let counts = model.param_counts(&store);
        assert_eq!(counts.total, counts.dialogue + counts.turn + counts.head);
        let all: usize = store.iter().map(|(_, e)| e.value.len()).sum();
        assert_eq!(counts.total, all);
    }

    #[test]
    fn full_pipeline_gradients_match_finite_differences_all_aggregators() {
        // tiny config, d = 8, a two-user-turn context, every strategy
        for aggregator in [
            AggregatorKind::Concat,
            AggregatorKind::Attention,
            AggregatorKind::CrossAttention,
        ] {
            let mut config = tiny_model_config(EncoderArch::SelfAttention);
            config.aggregator = aggregator;
            let model = EmtodModel::new(config, toy_vocab()).unwrap();
            let mut store = ParamStore::new(Precision::F64);
            model.register(&mut store, 5).unwrap();
            let ex = example();
            let report = grad_check(&mut store, &[], 1e-5, |s, tape| model.loss(tape, s, &ex))
                .unwrap();
            assert!(report.max_rel_err <= 1e-4, "{aggregator}: {report:?}");
        }
    }

    #[test]
    fn frozen_namespace_is_skipped_by_grad_check() {
        let model = EmtodModel::new(tiny_model_config(EncoderArch::SelfAttention), toy_vocab()).unwrap();
        let mut store = ParamStore::new(Precision::F64);
        model.register(&mut store, 5).unwrap();
        let ex = example();
        let full = grad_check(&mut store, &[], 1e-5, |s, tape| model.loss(tape, s, &ex)).unwrap();
        let partial =
            grad_check(&mut store, &["dialog.", "turn."], 1e-5, |s, tape| model.loss(tape, s, &ex))
                .unwrap();
        assert!(partial.entries_checked < full.entries_checked);
        assert_eq!(partial.entries_checked, store.count_values("head."));
    }
}
