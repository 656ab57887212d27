//! Fusion of the two encoder outputs and the sigmoid intent head.
//!
//! Three strategies: concatenate the CLS vectors, scaled dot-product
//! attention with the last-turn CLS querying the conversation tokens, or
//! cross-attention running that attention in both directions and
//! concatenating the results.

use serde::{Deserialize, Serialize};

use crate::context::EmbeddingPairNodes;
use crate::corpus::intents::{predicted_set, INTENTS, N_INTENTS};
use crate::error::{Error, Result};
use crate::nn::{Linear, NodeId, ParamStore, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    Concat,
    Attention,
    CrossAttention,
}

impl AggregatorKind {
    pub fn fused_dim(&self, d_k: usize) -> usize {
        match self {
            AggregatorKind::Concat | AggregatorKind::CrossAttention => 2 * d_k,
            AggregatorKind::Attention => d_k,
        }
    }
}

impl std::fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AggregatorKind::Concat => "concat",
            AggregatorKind::Attention => "attention",
            AggregatorKind::CrossAttention => "cross_attention",
        };
        write!(f, "{name}")
    }
}

pub struct FusionOutputNodes {
    pub y1: Option<NodeId>,
    pub y2: Option<NodeId>,
    pub fused: NodeId,
}

fn check_dims(tape: &Tape, dialog: &EmbeddingPairNodes, turn: &EmbeddingPairNodes) -> Result<usize> {
    let d = tape.value(dialog.cls).len();
    if tape.value(turn.cls).len() != d {
        return Err(Error::shape(
            "aggregator",
            format!(
                "encoder dims differ: dialogue {} vs turn {}",
                d,
                tape.value(turn.cls).len()
            ),
        ));
    }
    Ok(d)
}

/// fused = [dialogue CLS ; turn CLS].
pub fn fuse_concat(
    tape: &mut Tape,
    dialog: &EmbeddingPairNodes,
    turn: &EmbeddingPairNodes,
) -> Result<FusionOutputNodes> {
    check_dims(tape, dialog, turn)?;
    let fused = tape.concat(&[dialog.cls, turn.cls])?;
    Ok(FusionOutputNodes { y1: None, y2: None, fused })
}

/// softmax(query · tokensᵀ / √d_k) · tokens — tokens serve as both key
/// and value.
pub fn fuse_attention_node(
    tape: &mut Tape,
    query_cls: NodeId,
    kv_tokens: NodeId,
) -> Result<NodeId> {
    let d_k = tape.value(query_cls).len();
    if tape.value(kv_tokens).cols() != d_k {
        return Err(Error::shape(
            "fuse_attention",
            format!(
                "query dim {} vs token dim {}",
                d_k,
                tape.value(kv_tokens).cols()
            ),
        ));
    }
    if tape.value(kv_tokens).rows() == 0 {
        return Err(Error::shape("fuse_attention", "no token rows"));
    }
    let scores = tape.matmul_nt(query_cls, kv_tokens)?;
    let scaled = tape.affine(scores, 1.0 / (d_k as f64).sqrt(), 0.0);
    let weights = tape.softmax_rows(scaled);
    tape.matmul(weights, kv_tokens)
}

/// Attention strategy: the last-turn CLS queries the conversation tokens
/// (`swap` flips the direction for experimentation).
pub fn fuse_attention(
    tape: &mut Tape,
    dialog: &EmbeddingPairNodes,
    turn: &EmbeddingPairNodes,
    swap: bool,
) -> Result<FusionOutputNodes> {
    check_dims(tape, dialog, turn)?;
    let fused = if swap {
        fuse_attention_node(tape, dialog.cls, turn.tokens)?
    } else {
        fuse_attention_node(tape, turn.cls, dialog.tokens)?
    };
    Ok(FusionOutputNodes { y1: Some(fused), y2: None, fused })
}

/// Cross-attention: y1 = turn CLS over conversation tokens, y2 =
/// conversation CLS over turn tokens, fused = [y1 ; y2].
pub fn fuse_cross_attention(
    tape: &mut Tape,
    dialog: &EmbeddingPairNodes,
    turn: &EmbeddingPairNodes,
    swap: bool,
) -> Result<FusionOutputNodes> {
    check_dims(tape, dialog, turn)?;
    let (y1, y2) = if swap {
        (
            fuse_attention_node(tape, dialog.cls, turn.tokens)?,
            fuse_attention_node(tape, turn.cls, dialog.tokens)?,
        )
    } else {
        (
            fuse_attention_node(tape, turn.cls, dialog.tokens)?,
            fuse_attention_node(tape, dialog.cls, turn.tokens)?,
        )
    };
    let fused = tape.concat(&[y1, y2])?;
    Ok(FusionOutputNodes { y1: Some(y1), y2: Some(y2), fused })
}

/// Linear projection to the 13 intents followed by a sigmoid; the decision
/// rule is strict > 0.5 so a zero-initialized head predicts nothing.
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    linear: Linear,
}

pub const DECISION_THRESHOLD: f64 = 0.5;

impl ClassifierHead {
    pub fn new(d_in: usize) -> Self {
        Self { linear: Linear::new("head.out", d_in, N_INTENTS) }
    }

    pub fn d_in(&self) -> usize {
        self.linear.d_in
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl rand::Rng) -> Result<()> {
        self.linear.register(store, rng)
    }

    /// Probabilities node, shape [13].
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, fused: NodeId) -> Result<NodeId> {
        let logits = self.linear.forward(tape, store, fused)?;
        Ok(tape.sigmoid(logits))
    }
}

/// Final prediction: 13 probabilities plus the thresholded intent set.
#[derive(Debug, Clone, Serialize)]
pub struct IntentPrediction {
    pub probabilities: Vec<f64>,
    pub predicted_indices: Vec<usize>,
    pub predicted_intents: Vec<String>,
}

impl IntentPrediction {
    pub fn from_probs(probabilities: Vec<f64>) -> Self {
        let predicted_indices = predicted_set(&probabilities, DECISION_THRESHOLD);
        let predicted_intents = predicted_indices
            .iter()
            .map(|&i| INTENTS[i].to_string())
            .collect();
        Self { probabilities, predicted_indices, predicted_intents }
    }

    pub fn multi_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; N_INTENTS];
        for &i in &self.predicted_indices {
            v[i] = 1.0;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Precision, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(tape: &mut Tape, cls: Vec<f64>, tokens: Vec<Vec<f64>>) -> EmbeddingPairNodes {
        let cls = tape.input(Tensor::vector(cls));
        let tokens = tape.input(Tensor::matrix(&tokens).unwrap());
        EmbeddingPairNodes { cls, tokens }
    }

    #[test]
    fn concat_order_and_zero_behavior() {
        let mut tape = Tape::new();
        let dialog = pair(&mut tape, vec![1.0, 2.0], vec![vec![0.0, 0.0]]);
        let turn = pair(&mut tape, vec![3.0, 4.0], vec![vec![0.0, 0.0]]);
        let out = fuse_concat(&mut tape, &dialog, &turn).unwrap();
        assert_eq!(tape.value(out.fused).data(), &[1.0, 2.0, 3.0, 4.0]);

        let swapped = fuse_concat(&mut tape, &turn, &dialog).unwrap();
        assert_eq!(tape.value(swapped.fused).data(), &[3.0, 4.0, 1.0, 2.0]);

        let z1 = pair(&mut tape, vec![0.0, 0.0], vec![vec![0.0, 0.0]]);
        let z2 = pair(&mut tape, vec![0.0, 0.0], vec![vec![0.0, 0.0]]);
        let zeros = fuse_concat(&mut tape, &z1, &z2).unwrap();
        assert_eq!(tape.value(zeros.fused).data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let dialog = pair(&mut tape, vec![1.0, 2.0], vec![vec![0.0, 0.0]]);
        let turn = pair(&mut tape, vec![3.0, 4.0, 5.0], vec![vec![0.0, 0.0, 0.0]]);
        assert!(fuse_concat(&mut tape, &dialog, &turn).is_err());
        assert!(fuse_cross_attention(&mut tape, &dialog, &turn, false).is_err());
    }

    #[test]
    fn single_row_attention_returns_the_row() {
        let mut tape = Tape::new();
        let q = tape.input(Tensor::vector(vec![5.0, -3.0]));
        let tokens = tape.input(Tensor::matrix(&[vec![0.25, 0.75]]).unwrap());
        let out = fuse_attention_node(&mut tape, q, tokens).unwrap();
        assert_eq!(tape.value(out).data(), &[0.25, 0.75]);
    }

    #[test]
    fn identical_value_rows_collapse_to_that_value() {
        let mut tape = Tape::new();
        let q = tape.input(Tensor::vector(vec![0.4, 1.7]));
        let tokens = tape.input(
            Tensor::matrix(&[vec![0.3, -0.6], vec![0.3, -0.6], vec![0.3, -0.6]]).unwrap(),
        );
        let out = fuse_attention_node(&mut tape, q, tokens).unwrap();
        for (got, want) in tape.value(out).data().iter().zip(&[0.3, -0.6]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_matches_direct_formula_evaluation() {
        // q = [1,0], tokens = [[1,0],[0,1]]: scores = [1/sqrt(2), 0]
        let mut tape = Tape::new();
        let q = tape.input(Tensor::vector(vec![1.0, 0.0]));
        let tokens = tape.input(Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let out = fuse_attention_node(&mut tape, q, tokens).unwrap();

        // independent straight-line evaluation
        let s0 = 1.0 / 2.0_f64.sqrt();
        let w0 = s0.exp() / (s0.exp() + 1.0);
        let w1 = 1.0 - w0;
        let got = tape.value(out).data();
        assert!((got[0] - w0).abs() < 1e-12);
        assert!((got[1] - w1).abs() < 1e-12);
        assert!((got[0] - 0.66984).abs() <= 1e-4);
        assert!((got[1] - 0.33016).abs() <= 1e-4);
    }

    #[test]
    fn cross_attention_single_rows_and_symmetry() {
        let mut tape = Tape::new();
        let dialog = pair(&mut tape, vec![1.0, 0.0], vec![vec![0.5, 0.5]]);
        let turn = pair(&mut tape, vec![0.0, 1.0], vec![vec![-0.25, 0.75]]);
        let out = fuse_cross_attention(&mut tape, &dialog, &turn, false).unwrap();
        // y1 = turn CLS over dialogue tokens (one row), y2 the reverse
        assert_eq!(tape.value(out.fused).data(), &[0.5, 0.5, -0.25, 0.75]);

        let same_a = pair(&mut tape, vec![0.2, -0.4], vec![vec![1.0, 2.0], vec![3.0, -1.0]]);
        let same_b = pair(&mut tape, vec![0.2, -0.4], vec![vec![1.0, 2.0], vec![3.0, -1.0]]);
        let sym = fuse_cross_attention(&mut tape, &same_a, &same_b, false).unwrap();
        let y1 = tape.value(sym.y1.unwrap()).data().to_vec();
        let y2 = tape.value(sym.y2.unwrap()).data().to_vec();
        assert_eq!(y1, y2);
    }

    #[test]
    fn cross_attention_matches_straight_line_oracle() {
        let dialog_cls = [0.3, -0.7, 0.2];
        let dialog_tokens = [[0.1, 0.5, -0.2], [0.9, -0.3, 0.4], [-0.6, 0.2, 0.8]];
        let turn_cls = [0.5, 0.1, -0.4];
        let turn_tokens = [[0.2, 0.2, 0.7], [-0.1, 0.6, -0.5]];

        // independent straight-line reimplementation
        let oracle = |q: &[f64], rows: &[&[f64]]| -> Vec<f64> {
            let scale = 1.0 / (q.len() as f64).sqrt();
            let scores: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() * scale)
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut out = vec![0.0; q.len()];
            for (w, row) in exps.iter().zip(rows) {
                for (o, v) in out.iter_mut().zip(*row) {
                    *o += (w / z) * v;
                }
            }
            out
        };
        let want_y1 = oracle(&turn_cls, &dialog_tokens.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
        let want_y2 = oracle(&dialog_cls, &turn_tokens.iter().map(|r| r.as_slice()).collect::<Vec<_>>());

        let mut tape = Tape::new();
        let dialog = pair(
            &mut tape,
            dialog_cls.to_vec(),
            dialog_tokens.iter().map(|r| r.to_vec()).collect(),
        );
        let turn = pair(
            &mut tape,
            turn_cls.to_vec(),
            turn_tokens.iter().map(|r| r.to_vec()).collect(),
        );
        let out = fuse_cross_attention(&mut tape, &dialog, &turn, false).unwrap();
        let got = tape.value(out.fused).data();
        for (g, w) in got.iter().zip(want_y1.iter().chain(&want_y2)) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }

        // restricting to one direction reproduces fuse_attention exactly
        let single = fuse_attention(&mut tape, &dialog, &turn, false).unwrap();
        let y1 = tape.value(out.y1.unwrap()).data();
        assert_eq!(tape.value(single.fused).data(), y1);
    }

    #[test]
    fn attention_output_stays_in_convex_hull_and_sharpens() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        use rand::Rng;
        for _ in 0..200 {
            let d = rng.gen_range(2..6);
            let n = rng.gen_range(1..7);
            let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let mut tape = Tape::new();
            let qn = tape.input(Tensor::vector(q.clone()));
            let tn = tape.input(Tensor::matrix(&rows).unwrap());
            let out = fuse_attention_node(&mut tape, qn, tn).unwrap();
            for (j, v) in tape.value(out).data().iter().enumerate() {
                let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                assert!(*v >= lo - 1e-6 && *v <= hi + 1e-6, "coordinate {j} out of hull");
            }

            // scaling the query sharpens toward the argmax row
            let weights_for = |scale: f64| -> Vec<f64> {
                let mut tape = Tape::new();
                let qs: Vec<f64> = q.iter().map(|v| v * scale).collect();
                let qn = tape.input(Tensor::vector(qs));
                let tn = tape.input(Tensor::matrix(&rows).unwrap());
                let scores = tape.matmul_nt(qn, tn).unwrap();
                let scaled = tape.affine(scores, 1.0 / (d as f64).sqrt(), 0.0);
                let w = tape.softmax_rows(scaled);
                tape.value(w).data().to_vec()
            };
            let w1 = weights_for(1.0);
            let argmax = (0..n).max_by(|&a, &b| w1[a].partial_cmp(&w1[b]).unwrap()).unwrap();
            let mut prev = w1[argmax];
            for c in [2.0, 4.0, 8.0] {
                let w = weights_for(c)[argmax];
                assert!(w >= prev - 1e-9, "argmax weight decreased under sharpening");
                prev = w;
            }
        }
    }

    #[test]
    fn head_boundary_and_hand_cases() {
        // zero weights and bias: all probabilities 0.5, empty prediction
        let head = ClassifierHead::new(4);
        let mut store = ParamStore::new(Precision::F64);
        store.register("head.out.weight", Tensor::zeros(vec![4, N_INTENTS])).unwrap();
        store.register("head.out.bias", Tensor::zeros(vec![N_INTENTS])).unwrap();
        let mut tape = Tape::new();
        let fused = tape.input(Tensor::vector(vec![0.5, -1.0, 2.0, 0.0]));
        let probs = head.forward(&mut tape, &store, fused).unwrap();
        let pred = IntentPrediction::from_probs(tape.value(probs).data().to_vec());
        assert!(pred.probabilities.iter().all(|&p| p == 0.5));
        assert!(pred.predicted_indices.is_empty());

        // +10 bias on one intent forces that prediction
        store
            .set_value("head.out.bias", {
                let mut b = vec![0.0; N_INTENTS];
                b[7] = 10.0;
                Tensor::vector(b)
            })
            .unwrap();
        let mut tape = Tape::new();
        let fused = tape.input(Tensor::vector(vec![0.0; 4]));
        let probs = head.forward(&mut tape, &store, fused).unwrap();
        let pred = IntentPrediction::from_probs(tape.value(probs).data().to_vec());
        assert_eq!(pred.predicted_indices, vec![7]);
        assert_eq!(pred.predicted_intents, vec![INTENTS[7].to_string()]);

        // hand-set 2-dim head matches direct sigmoid evaluation
        let mut store = ParamStore::new(Precision::F64);
        store
            .register("head.out.weight", {
                let mut w = Tensor::zeros(vec![2, N_INTENTS]);
                w.data_mut()[0] = 1.5; // weight[0, 0]
                w.data_mut()[N_INTENTS + 1] = -2.0; // weight[1, 1]
                w
            })
            .unwrap();
        store.register("head.out.bias", Tensor::zeros(vec![N_INTENTS])).unwrap();
        let head = ClassifierHead::new(2);
        let mut tape = Tape::new();
        let fused = tape.input(Tensor::vector(vec![0.8, 0.6]));
        let probs = head.forward(&mut tape, &store, fused).unwrap();
        let got = tape.value(probs).data();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!((got[0] - sig(1.5 * 0.8)).abs() < 1e-6);
        assert!((got[1] - sig(-2.0 * 0.6)).abs() < 1e-6);
    }

    #[test]
    fn fusion_gradients_match_finite_differences() {
        // gradients flow through both attention directions into the inputs
        let mut store = ParamStore::new(Precision::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        store.register_uniform("dcls", vec![3], 1.0, &mut rng).unwrap();
        store.register_uniform("dtok", vec![4, 3], 1.0, &mut rng).unwrap();
        store.register_uniform("tcls", vec![3], 1.0, &mut rng).unwrap();
        store.register_uniform("ttok", vec![2, 3], 1.0, &mut rng).unwrap();
        for kind in [AggregatorKind::Concat, AggregatorKind::Attention, AggregatorKind::CrossAttention] {
            let report = grad_check(&mut store, &[], 1e-5, |s, tape| {
                let dialog = EmbeddingPairNodes {
                    cls: tape.param(s, "dcls")?,
                    tokens: tape.param(s, "dtok")?,
                };
                let turn = EmbeddingPairNodes {
                    cls: tape.param(s, "tcls")?,
                    tokens: tape.param(s, "ttok")?,
                };
                let out = match kind {
                    AggregatorKind::Concat => fuse_concat(tape, &dialog, &turn)?,
                    AggregatorKind::Attention => fuse_attention(tape, &dialog, &turn, false)?,
                    AggregatorKind::CrossAttention => {
                        fuse_cross_attention(tape, &dialog, &turn, false)?
                    }
                };
                let probe_len = tape.value(out.fused).len();
                let weights: Vec<f64> = (0..probe_len).map(|i| 0.37 * i as f64 - 0.8).collect();
                let s0 = tape.dot_const(out.fused, Tensor::vector(weights))?;
                let sig = tape.sigmoid(s0);
                tape.bce_mean(sig, Tensor::vector(vec![1.0]))
            })
            .unwrap();
            assert!(report.max_rel_err <= 1e-4, "{kind}: {report:?}");
        }
    }
}
