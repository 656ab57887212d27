//! Dialogue contextualizer: assemble the summarized history, serialize it
//! with role markers, and encode it with two separate encoders that each
//! emit (CLS vector, token matrix).
//!
//! Serialization runs over an extended token space: the text vocabulary
//! followed by one reserved id per agent action tag, so a tag is a single
//! readable symbol for the dialogue encoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{summarize_agent_turn, truncate_agent_turn, ActionTable};
use crate::corpus::actions::{action_index, ACTIONS, N_ACTIONS};
use crate::corpus::schema::{Role, Turn};
use crate::corpus::vocab::Vocab;
use crate::error::{Error, Result};
use crate::nn::{Embedding, GruCell, LayerNorm, Linear, NodeId, ParamStore, Tape, Tensor};
use crate::scopeit::ScopeIt;

#[derive(Debug, Clone)]
pub enum SummaryEntry {
    User(String),
    AgentTag(String),
    AgentText(String),
}

impl SummaryEntry {
    pub fn role(&self) -> Role {
        match self {
            SummaryEntry::User(_) => Role::User,
            _ => Role::Agent,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            SummaryEntry::User(t) | SummaryEntry::AgentTag(t) | SummaryEntry::AgentText(t) => t,
        }
    }
}

/// Summarized history {Û_1, Ŝ_1, ..., Ŝ_{t−1}, Û_t} plus the last user turn.
#[derive(Debug, Clone)]
pub struct SummarizedContext {
    pub entries: Vec<SummaryEntry>,
    pub last_user_turn: String,
}

pub enum UserSummarizer<'a> {
    /// Keep the full turn text.
    Full,
    ScopeIt { model: &'a ScopeIt, store: &'a ParamStore },
}

pub enum AgentSummarizer<'a> {
    Full,
    Truncate { max_tokens: usize },
    ActionTags { table: &'a ActionTable },
}

/// Replace each turn of a prefix ending in a user turn by its summary.
pub fn build_context(
    prefix: &[Turn],
    vocab: &Vocab,
    user_summarizer: &UserSummarizer,
    agent_summarizer: &AgentSummarizer,
) -> Result<SummarizedContext> {
    let Some(last) = prefix.last() else {
        return Err(Error::Corpus("cannot build context from an empty prefix".to_string()));
    };
    if last.role != Role::User {
        return Err(Error::Corpus("context prefix must end in a user turn".to_string()));
    }
    let mut entries = Vec::with_capacity(prefix.len());
    for turn in prefix {
        let entry = match turn.role {
            Role::User => {
                let text = match user_summarizer {
                    UserSummarizer::Full => turn.text(),
                    UserSummarizer::ScopeIt { model, store } => {
                        model.summarize_turn(store, vocab, turn)?
                    }
                };
                SummaryEntry::User(text)
            }
            Role::Agent => match agent_summarizer {
                AgentSummarizer::Full => SummaryEntry::AgentText(turn.text()),
                AgentSummarizer::Truncate { max_tokens } => {
                    SummaryEntry::AgentText(truncate_agent_turn(&turn.text(), *max_tokens))
                }
                AgentSummarizer::ActionTags { table } => {
                    SummaryEntry::AgentTag(summarize_agent_turn(&turn.text(), table))
                }
            },
        };
        entries.push(entry);
    }
    let last_user_turn = entries.last().unwrap().text().to_string();
    Ok(SummarizedContext { entries, last_user_turn })
}

/// Text vocabulary plus one reserved id per action tag.
#[derive(Debug, Clone)]
pub struct TokenSpace {
    vocab: Vocab,
}

impl TokenSpace {
    pub fn new(vocab: Vocab) -> Self {
        Self { vocab }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn size(&self) -> usize {
        self.vocab.len() + N_ACTIONS
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        self.vocab.encode(text)
    }

    pub fn tag_id(&self, tag: &str) -> Result<usize> {
        action_index(tag)
            .map(|i| self.vocab.len() + i)
            .ok_or_else(|| Error::Corpus(format!("unknown action tag `{tag}`")))
    }

    /// Inverse mapping for debugging and tests.
    pub fn describe(&self, id: usize) -> String {
        if id < self.vocab.len() {
            self.vocab.token(id).to_string()
        } else {
            ACTIONS[id - self.vocab.len()].to_string()
        }
    }
}

/// [CLS] then, per entry, a role marker followed by the entry's tokens.
/// Truncated from the front (oldest tokens dropped first) to `max_len`,
/// never dropping the final user turn; a final turn that alone exceeds the
/// budget is tail-truncated inside the turn.
pub fn serialize_context(
    ctx: &SummarizedContext,
    space: &TokenSpace,
    max_len: usize,
) -> Result<Vec<usize>> {
    if max_len < 3 {
        return Err(Error::Config(format!("max sequence length {max_len} is too small")));
    }
    let entry_tokens = |entry: &SummaryEntry| -> Result<Vec<usize>> {
        let marker = match entry.role() {
            Role::User => space.vocab.usr_id(),
            Role::Agent => space.vocab.sys_id(),
        };
        let mut toks = vec![marker];
        match entry {
            SummaryEntry::AgentTag(tag) => toks.push(space.tag_id(tag)?),
            other => toks.extend(space.encode_text(other.text())),
        }
        Ok(toks)
    };

    let (head_entries, final_entry) = ctx
        .entries
        .split_at(ctx.entries.len().saturating_sub(1));
    let final_tokens = entry_tokens(&final_entry[0])?;
    let budget = max_len - 1;

    let mut seq = vec![space.vocab.cls_id()];
    if final_tokens.len() >= budget {
        seq.extend_from_slice(&final_tokens[..budget]);
        return Ok(seq);
    }
    let mut head_stream = Vec::new();
    for entry in head_entries {
        head_stream.extend(entry_tokens(entry)?);
    }
    let keep = budget - final_tokens.len();
    let start = head_stream.len().saturating_sub(keep);
    seq.extend_from_slice(&head_stream[start..]);
    seq.extend_from_slice(&final_tokens);
    Ok(seq)
}

/// [CLS] plus the last user turn's tokens, tail-truncated to `max_len`.
pub fn serialize_turn(text: &str, space: &TokenSpace, max_len: usize) -> Result<Vec<usize>> {
    if max_len < 2 {
        return Err(Error::Config(format!("max sequence length {max_len} is too small")));
    }
    let mut seq = vec![space.vocab.cls_id()];
    let toks = space.encode_text(text);
    let keep = toks.len().min(max_len - 1);
    seq.extend_from_slice(&toks[..keep]);
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderArch {
    SelfAttention,
    Recurrent,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub arch: EncoderArch,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_mult: usize,
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            arch: EncoderArch::SelfAttention,
            d_model: 64,
            heads: 4,
            blocks: 2,
            ffn_mult: 4,
            max_len: 256,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.blocks == 0 || self.max_len < 3 {
            return Err(Error::Config("encoder dims must be positive".to_string()));
        }
        match self.arch {
            EncoderArch::SelfAttention => {
                if self.heads == 0 || self.d_model % self.heads != 0 {
                    return Err(Error::Config(format!(
                        "d_model {} must divide evenly into {} heads",
                        self.d_model, self.heads
                    )));
                }
                if self.ffn_mult == 0 {
                    return Err(Error::Config("ffn_mult must be positive".to_string()));
                }
            }
            EncoderArch::Recurrent => {
                if self.d_model % 2 != 0 {
                    return Err(Error::Config(
                        "recurrent encoder needs an even d_model (two directions)".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// CLS vector and token matrix, as tape nodes during training.
pub struct EmbeddingPairNodes {
    pub cls: NodeId,
    pub tokens: NodeId,
}

/// Value-level encoder output.
#[derive(Debug, Clone)]
pub struct EmbeddingPair {
    pub cls: Tensor,
    pub tokens: Tensor,
}

struct AttentionBlock {
    wq: Vec<Linear>,
    wk: Vec<Linear>,
    wv: Vec<Linear>,
    wo: Vec<Linear>,
    ln_attn: LayerNorm,
    ffn_in: Linear,
    ffn_out: Linear,
    ln_ffn: LayerNorm,
}

enum EncoderKind {
    SelfAttention { pos_name: String, blocks: Vec<AttentionBlock> },
    Recurrent { layers: Vec<(GruCell, GruCell)> },
}

/// One encoder (dialogue or turn) over the extended token space.
pub struct Encoder {
    pub namespace: String,
    pub config: EncoderConfig,
    embedding: Embedding,
    kind: EncoderKind,
}

impl Encoder {
    pub fn new(namespace: &str, config: EncoderConfig, token_space_size: usize) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let embedding = Embedding::new(format!("{namespace}.embed"), token_space_size, d);
        let kind = match config.arch {
            EncoderArch::SelfAttention => {
                let head_dim = d / config.heads;
                let blocks = (0..config.blocks)
                    .map(|b| {
                        let base = format!("{namespace}.block{b}");
                        AttentionBlock {
                            wq: (0..config.heads)
                                .map(|h| Linear::new(format!("{base}.head{h}.wq"), d, head_dim))
                                .collect(),
                            wk: (0..config.heads)
                                .map(|h| Linear::new(format!("{base}.head{h}.wk"), d, head_dim))
                                .collect(),
                            wv: (0..config.heads)
                                .map(|h| Linear::new(format!("{base}.head{h}.wv"), d, head_dim))
                                .collect(),
                            wo: (0..config.heads)
                                .map(|h| Linear::new(format!("{base}.head{h}.wo"), head_dim, d))
                                .collect(),
                            ln_attn: LayerNorm::new(format!("{base}.ln_attn"), d),
                            ffn_in: Linear::new(format!("{base}.ffn_in"), d, d * config.ffn_mult),
                            ffn_out: Linear::new(format!("{base}.ffn_out"), d * config.ffn_mult, d),
                            ln_ffn: LayerNorm::new(format!("{base}.ln_ffn"), d),
                        }
                    })
                    .collect();
                EncoderKind::SelfAttention { pos_name: format!("{namespace}.pos"), blocks }
            }
            EncoderArch::Recurrent => {
                let layers = (0..config.blocks)
                    .map(|b| {
                        let base = format!("{namespace}.layer{b}");
                        (
                            GruCell::new(format!("{base}.fwd"), d, d / 2),
                            GruCell::new(format!("{base}.bwd"), d, d / 2),
                        )
                    })
                    .collect();
                EncoderKind::Recurrent { layers }
            }
        };
        Ok(Self { namespace: namespace.to_string(), config, embedding, kind })
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        self.embedding.register(store, rng)?;
        match &self.kind {
            EncoderKind::SelfAttention { pos_name, blocks } => {
                let bound = 1.0 / (self.config.d_model as f64).sqrt();
                store.register_uniform(
                    pos_name,
                    vec![self.config.max_len, self.config.d_model],
                    bound,
                    rng,
                )?;
                for block in blocks {
                    for lin in block
                        .wq
                        .iter()
                        .chain(&block.wk)
                        .chain(&block.wv)
                        .chain(&block.wo)
                    {
                        lin.register(store, rng)?;
                    }
                    block.ln_attn.register(store)?;
                    block.ffn_in.register(store, rng)?;
                    block.ffn_out.register(store, rng)?;
                    block.ln_ffn.register(store)?;
                }
            }
            EncoderKind::Recurrent { layers } => {
                for (fwd, bwd) in layers {
                    fwd.register(store, rng)?;
                    bwd.register(store, rng)?;
                }
            }
        }
        Ok(())
    }

    /// Build the encoder forward pass on a tape.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<EmbeddingPairNodes> {
        if ids.is_empty() {
            return Err(Error::shape(
                format!("encoder `{}`", self.namespace),
                "empty token sequence",
            ));
        }
        if ids.len() > self.config.max_len {
            return Err(Error::shape(
                format!("encoder `{}`", self.namespace),
                format!("sequence length {} exceeds max {}", ids.len(), self.config.max_len),
            ));
        }
        let mut x = self.embedding.lookup(tape, store, ids)?;
        match &self.kind {
            EncoderKind::SelfAttention { pos_name, blocks } => {
                let pos_table = tape.param(store, pos_name)?;
                let positions: Vec<usize> = (0..ids.len()).collect();
                let pos = tape.embed_lookup(pos_table, &positions)?;
                x = tape.add(x, pos)?;
                let head_dim = self.config.d_model / self.config.heads;
                let scale = 1.0 / (head_dim as f64).sqrt();
                for block in blocks {
                    // multi-head self-attention with per-head out projections
                    let mut attn_sum: Option<NodeId> = None;
                    for h in 0..self.config.heads {
                        let q = block.wq[h].forward(tape, store, x)?;
                        let k = block.wk[h].forward(tape, store, x)?;
                        let v = block.wv[h].forward(tape, store, x)?;
                        let scores = tape.matmul_nt(q, k)?;
                        let scaled = tape.affine(scores, scale, 0.0);
                        let weights = tape.softmax_rows(scaled);
                        let ctx = tape.matmul(weights, v)?;
                        let projected = block.wo[h].forward(tape, store, ctx)?;
                        attn_sum = Some(match attn_sum {
                            None => projected,
                            Some(acc) => tape.add(acc, projected)?,
                        });
                    }
                    let res = tape.add(x, attn_sum.unwrap())?;
                    x = block.ln_attn.forward(tape, store, res)?;

                    let hidden = block.ffn_in.forward(tape, store, x)?;
                    let hidden = tape.gelu(hidden);
                    let ffn = block.ffn_out.forward(tape, store, hidden)?;
                    let res = tape.add(x, ffn)?;
                    x = block.ln_ffn.forward(tape, store, res)?;
                }
            }
            EncoderKind::Recurrent { layers } => {
                for (fwd_cell, bwd_cell) in layers {
                    let rows: Vec<NodeId> = (0..ids.len())
                        .map(|i| tape.row(x, i))
                        .collect::<Result<_>>()?;
                    let fwd = fwd_cell.run(tape, store, &rows)?;
                    let rev: Vec<NodeId> = rows.iter().rev().copied().collect();
                    let bwd = bwd_cell.run(tape, store, &rev)?;
                    let n = rows.len();
                    let combined: Vec<NodeId> = (0..n)
                        .map(|i| tape.concat(&[fwd[i], bwd[n - 1 - i]]))
                        .collect::<Result<_>>()?;
                    x = tape.stack_rows(&combined)?;
                }
            }
        }
        let cls = tape.row(x, 0)?;
        Ok(EmbeddingPairNodes { cls, tokens: x })
    }

    /// Value-level forward for inference.
    pub fn encode_values(&self, store: &ParamStore, ids: &[usize]) -> Result<EmbeddingPair> {
        let mut tape = Tape::new();
        let pair = self.encode(&mut tape, store, ids)?;
        Ok(EmbeddingPair {
            cls: tape.value(pair.cls).clone(),
            tokens: tape.value(pair.tokens).clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::schema::Sentence;
    use crate::nn::{grad_check, Precision};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn user_turn(texts: &[&str]) -> Turn {
        Turn {
            role: Role::User,
            speaker_id: "u".to_string(),
            sentences: texts
                .iter()
                .map(|t| Sentence { text: t.to_string(), relevant: true })
                .collect(),
            gold_intents: Some(vec!["no_action".to_string()]),
            gold_action: None,
            ambiguous: Some(false),
        }
    }

    fn agent_turn(text: &str, action: &str) -> Turn {
        Turn {
            role: Role::Agent,
            speaker_id: "assistant".to_string(),
            sentences: vec![Sentence { text: text.to_string(), relevant: true }],
            gold_intents: None,
            gold_action: Some(action.to_string()),
            ambiguous: None,
        }
    }

    fn toy_vocab() -> Vocab {
        let d = crate::corpus::schema::Dialogue {
            id: "v".to_string(),
            turns: vec![user_turn(&["hi a b how about monday at noon which day works best"])],
        };
        Vocab::build(&[d], 1).unwrap()
    }

    #[test]
    fn single_turn_context() {
        let vocab = toy_vocab();
        let ctx = build_context(
            &[user_turn(&["hi"])],
            &vocab,
            &UserSummarizer::Full,
            &AgentSummarizer::Full,
        )
        .unwrap();
        assert_eq!(ctx.entries.len(), 1);
        assert_eq!(ctx.last_user_turn, "hi");
    }

    #[test]
    fn three_turn_context_has_tag_in_the_middle() {
        let vocab = toy_vocab();
        let table = ActionTable::default_table();
        let ctx = build_context(
            &[
                user_turn(&["a"]),
                agent_turn("how about monday at noon ?", "propose_single_time"),
                user_turn(&["b"]),
            ],
            &vocab,
            &UserSummarizer::Full,
            &AgentSummarizer::ActionTags { table: &table },
        )
        .unwrap();
        assert_eq!(ctx.entries.len(), 3);
        match &ctx.entries[1] {
            SummaryEntry::AgentTag(tag) => assert_eq!(tag, "propose_single_time"),
            other => panic!("expected a tag, got {other:?}"),
        }
        assert_eq!(ctx.last_user_turn, "b");
    }

    #[test]
    fn prefix_must_end_in_user_turn() {
        let vocab = toy_vocab();
        let err = build_context(
            &[user_turn(&["a"]), agent_turn("how about monday ?", "propose_single_time")],
            &vocab,
            &UserSummarizer::Full,
            &AgentSummarizer::Full,
        );
        assert!(err.is_err());
        assert!(build_context(&[], &vocab, &UserSummarizer::Full, &AgentSummarizer::Full).is_err());
    }

    #[test]
    fn tau_zero_scopeit_keeps_full_turn() {
        use crate::scopeit::{ScopeIt, ScopeItConfig};
        let vocab = toy_vocab();
        let model = ScopeIt::new(
            ScopeItConfig { d_embed: 4, d_word_hidden: 4, d_sent_hidden: 4, tau: 0.0 },
            vocab.len(),
        );
        let mut store = ParamStore::new(Precision::F64);
        model.register(&mut store, 11).unwrap();
        let turn = user_turn(&["hi a", "b how"]);
        let ctx = build_context(
            &[turn.clone()],
            &vocab,
            &UserSummarizer::ScopeIt { model: &model, store: &store },
            &AgentSummarizer::Full,
        )
        .unwrap();
        assert_eq!(ctx.last_user_turn, turn.text());
    }

    #[test]
    fn serialization_format_and_truncation() {
        let vocab = toy_vocab();
        let space = TokenSpace::new(vocab);

        let ctx = SummarizedContext {
            entries: vec![SummaryEntry::User("hi".to_string())],
            last_user_turn: "hi".to_string(),
        };
        let seq = serialize_context(&ctx, &space, 16).unwrap();
        let rendered: Vec<String> = seq.iter().map(|&i| space.describe(i)).collect();
        assert_eq!(rendered, vec!["[CLS]", "[USR]", "hi"]);

        let ctx = SummarizedContext {
            entries: vec![
                SummaryEntry::User("a".to_string()),
                SummaryEntry::AgentTag("ask_day".to_string()),
                SummaryEntry::User("b".to_string()),
            ],
            last_user_turn: "b".to_string(),
        };
        let seq = serialize_context(&ctx, &space, 16).unwrap();
        let rendered: Vec<String> = seq.iter().map(|&i| space.describe(i)).collect();
        assert_eq!(rendered, vec!["[CLS]", "[USR]", "a", "[SYS]", "ask_day", "[USR]", "b"]);

        // max 5: oldest tokens dropped, final user turn intact at the end
        let seq = serialize_context(&ctx, &space, 5).unwrap();
        let rendered: Vec<String> = seq.iter().map(|&i| space.describe(i)).collect();
        assert_eq!(rendered, vec!["[CLS]", "[SYS]", "ask_day", "[USR]", "b"]);

        // final turn alone exceeding the budget is tail-truncated within
        let ctx = SummarizedContext {
            entries: vec![SummaryEntry::User("hi a b how about monday".to_string())],
            last_user_turn: "hi a b how about monday".to_string(),
        };
        let seq = serialize_context(&ctx, &space, 4).unwrap();
        let rendered: Vec<String> = seq.iter().map(|&i| space.describe(i)).collect();
        assert_eq!(rendered, vec!["[CLS]", "[USR]", "hi", "a"]);
    }

    #[test]
    fn role_markers_make_serialization_injective() {
        let space = TokenSpace::new(toy_vocab());
        let as_user = SummarizedContext {
            entries: vec![
                SummaryEntry::User("a".to_string()),
                SummaryEntry::AgentText("b".to_string()),
                SummaryEntry::User("hi".to_string()),
            ],
            last_user_turn: "hi".to_string(),
        };
        let mut swapped_entries = as_user.entries.clone();
        swapped_entries[1] = SummaryEntry::User("b".to_string());
        let swapped = SummarizedContext { entries: swapped_entries, last_user_turn: "hi".to_string() };
        assert_ne!(
            serialize_context(&as_user, &space, 32).unwrap(),
            serialize_context(&swapped, &space, 32).unwrap()
        );
    }

    fn tiny_encoder(ns: &str, arch: EncoderArch, space: usize) -> (Encoder, ParamStore) {
        let config = EncoderConfig {
            arch,
            d_model: 8,
            heads: 2,
            blocks: 2,
            ffn_mult: 2,
            max_len: 16,
        };
        let enc = Encoder::new(ns, config, space).unwrap();
        let mut store = ParamStore::new(Precision::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        enc.register(&mut store, &mut rng).unwrap();
        (enc, store)
    }

    #[test]
    fn cls_is_position_zero_and_shapes_hold() {
        for arch in [EncoderArch::SelfAttention, EncoderArch::Recurrent] {
            let (enc, store) = tiny_encoder("dialog", arch, 30);
            let pair = enc.encode_values(&store, &[2, 7, 9, 4]).unwrap();
            assert_eq!(pair.tokens.shape(), &[4, 8]);
            assert_eq!(pair.cls.shape(), &[8]);
            assert_eq!(pair.cls.data(), pair.tokens.row_slice(0));
            assert!(pair.tokens.is_finite());

            let single = enc.encode_values(&store, &[2]).unwrap();
            assert_eq!(single.tokens.shape(), &[1, 8]);
        }
    }

    #[test]
    fn distinct_namespaces_encode_differently() {
        let (dialog, mut store) = tiny_encoder("dialog", EncoderArch::SelfAttention, 30);
        let turn_enc = Encoder::new(
            "turn",
            EncoderConfig { arch: EncoderArch::SelfAttention, d_model: 8, heads: 2, blocks: 2, ffn_mult: 2, max_len: 16 },
            30,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        turn_enc.register(&mut store, &mut rng).unwrap();
        let ids = [2usize, 7, 9];
        let a = dialog.encode_values(&store, &ids).unwrap();
        let b = turn_enc.encode_values(&store, &ids).unwrap();
        assert_ne!(a.cls.data(), b.cls.data());
    }

    #[test]
    fn sequence_limits_are_enforced() {
        let (enc, store) = tiny_encoder("dialog", EncoderArch::SelfAttention, 30);
        assert!(enc.encode_values(&store, &[]).is_err());
        let too_long: Vec<usize> = (0..17).map(|i| i % 5).collect();
        assert!(enc.encode_values(&store, &too_long).is_err());
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        for arch in [EncoderArch::SelfAttention, EncoderArch::Recurrent] {
            let (enc, mut store) = tiny_encoder("dialog", arch, 20);
            let ids = [2usize, 7, 9, 4];
            let weights: Vec<f64> = (0..8).map(|i| 0.3 * (i as f64) - 1.1).collect();
            let report = grad_check(&mut store, &[], 1e-5, |s, tape| {
                let pair = enc.encode(tape, s, &ids)?;
                let probe = tape.dot_const(pair.cls, Tensor::vector(weights.clone()))?;
                let sig = tape.sigmoid(probe);
                tape.bce_mean(sig, Tensor::vector(vec![1.0]))
            })
            .unwrap();
            assert!(report.max_rel_err <= 1e-4, "{arch:?}: {report:?}");
        }
    }
}
