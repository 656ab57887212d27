//! End-to-end behavior of the training pipeline on small corpora.

use emtod::agent::ActionTable;
use emtod::context::{EncoderArch, EncoderConfig};
use emtod::corpus::{generate, CorpusConfig, Vocab};
use emtod::model::{
    AgentSummarizerKind, EmtodModel, ModelConfig, ModelKind, UserSummarizerKind,
};
use emtod::aggregator::AggregatorKind;
use emtod::trainer::{
    self, encode_examples, load_model, predict_all, predict_dialogue, save_model, train,
    TrainConfig,
};
use emtod::eval::compute_metrics;

fn small_encoder(max_len: usize) -> EncoderConfig {
    EncoderConfig {
        arch: EncoderArch::SelfAttention,
        d_model: 16,
        heads: 2,
        blocks: 1,
        ffn_mult: 2,
        max_len,
    }
}

fn small_model_config() -> ModelConfig {
    ModelConfig {
        kind: ModelKind::Dual,
        aggregator: AggregatorKind::CrossAttention,
        swap_attention_direction: false,
        dialogue_encoder: small_encoder(48),
        turn_encoder: small_encoder(24),
        user_summarizer: UserSummarizerKind::None,
        agent_summarizer: AgentSummarizerKind::ActionTags,
        trunc_len: 20,
    }
}

struct Fixture {
    model: EmtodModel,
    train_examples: Vec<emtod::model::EncodedExample>,
    val_examples: Vec<emtod::model::EncodedExample>,
    corpus: emtod::corpus::GeneratedCorpus,
}

fn fixture(n_dialogues: usize) -> Fixture {
    let corpus = generate(&CorpusConfig { n_dialogues, ..Default::default() }).unwrap();
    let vocab = Vocab::build(&corpus.train, 1).unwrap();
    let model = EmtodModel::new(small_model_config(), vocab).unwrap();
    let table = ActionTable::default_table();
    let train_examples = encode_examples(&corpus.train, &model, None, &table).unwrap();
    let val_examples = encode_examples(&corpus.val, &model, None, &table).unwrap();
    Fixture { model, train_examples, val_examples, corpus }
}

#[test]
fn memorizes_a_tiny_corpus_with_cross_attention() {
    let fx = fixture(50);
    let tc = TrainConfig {
        lr: 3e-3,
        max_epochs: 20,
        patience: 20,
        batch_size: 8,
        ..Default::default()
    };
    // validate on the training set itself: this is a capacity check
    let (store, logs) = train(&fx.model, &fx.train_examples, &fx.train_examples, &tc).unwrap();

    assert!(logs.len() >= 3);
    assert!(
        logs[0].train_loss > logs[1].train_loss && logs[1].train_loss > logs[2].train_loss,
        "training loss is not strictly decreasing over the first 3 epochs: {:?}",
        logs.iter().map(|l| l.train_loss).collect::<Vec<_>>()
    );

    let preds = predict_all(&fx.model, &store, &fx.train_examples).unwrap();
    let pred: Vec<Vec<f64>> = preds.iter().map(|p| p.multi_hot()).collect();
    let gold: Vec<Vec<f64>> = fx.train_examples.iter().map(|e| e.targets.clone()).collect();
    let report = compute_metrics(&pred, &gold).unwrap();
    assert!(report.micro_f1 >= 0.95, "train micro-F1 {}", report.micro_f1);
}

#[test]
fn patience_zero_runs_exactly_one_epoch() {
    let fx = fixture(20);
    let tc = TrainConfig { max_epochs: 10, patience: 0, ..Default::default() };
    let (_store, logs) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    assert_eq!(logs.len(), 1);
}

#[test]
fn freezing_everything_but_the_head_preserves_encoder_params() {
    let fx = fixture(20);
    let tc = TrainConfig {
        max_epochs: 2,
        patience: 5,
        freeze: vec!["dialog.".to_string(), "turn.".to_string()],
        ..Default::default()
    };
    let (store, _) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();

    // reference init with the same seed
    let mut init = emtod::nn::ParamStore::new(emtod::nn::Precision::F32);
    fx.model.register(&mut init, tc.seed).unwrap();

    let mut head_changed = false;
    for (name, entry) in store.iter() {
        let before = init.value(name).unwrap();
        let same = entry
            .value
            .data()
            .iter()
            .zip(before.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if name.starts_with("dialog.") || name.starts_with("turn.") {
            assert!(same, "frozen parameter `{name}` changed");
        } else if !same {
            head_changed = true;
        }
    }
    assert!(head_changed, "head parameters never moved");
}

#[test]
fn bad_freeze_prefix_is_rejected() {
    let fx = fixture(10);
    let tc = TrainConfig {
        max_epochs: 1,
        freeze: vec!["nonexistent.".to_string()],
        ..Default::default()
    };
    assert!(train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).is_err());
}

#[test]
fn training_is_bitwise_deterministic() {
    let fx = fixture(25);
    let tc = TrainConfig { max_epochs: 3, patience: 5, ..Default::default() };
    let (store1, logs1) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    let (store2, logs2) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    for (name, entry) in store1.iter() {
        let other = store2.value(name).unwrap();
        assert!(
            entry.value.data().iter().zip(other.data()).all(|(a, b)| a.to_bits() == b.to_bits()),
            "parameter `{name}` differs across identical runs"
        );
    }
    let l1 = serde_json::to_string(&logs1).unwrap();
    let l2 = serde_json::to_string(&logs2).unwrap();
    assert_eq!(l1, l2);
}

#[test]
fn returned_checkpoint_is_the_best_epoch() {
    let fx = fixture(30);
    let tc = TrainConfig { max_epochs: 4, patience: 10, ..Default::default() };
    let (store, logs) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    let preds = predict_all(&fx.model, &store, &fx.val_examples).unwrap();
    let pred: Vec<Vec<f64>> = preds.iter().map(|p| p.multi_hot()).collect();
    let gold: Vec<Vec<f64>> = fx.val_examples.iter().map(|e| e.targets.clone()).collect();
    let report = compute_metrics(&pred, &gold).unwrap();
    let best_logged = logs.iter().map(|l| l.val_micro_f1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report.micro_f1, best_logged);
}

#[test]
fn predictions_survive_checkpoint_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(20);
    let tc = TrainConfig { max_epochs: 1, ..Default::default() };
    let (store, _) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();

    let before: Vec<_> = predict_all(&fx.model, &store, &fx.val_examples).unwrap();
    let path = dir.path().join("model.ckpt");
    save_model(&path, &fx.model, &store).unwrap();
    let restored = load_model(&path, &fx.model).unwrap();
    let after: Vec<_> = predict_all(&fx.model, &restored, &fx.val_examples).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!(a
            .probabilities
            .iter()
            .zip(&b.probabilities)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    // a different configuration refuses the checkpoint
    let mut other_config = small_model_config();
    other_config.aggregator = AggregatorKind::Concat;
    let other = EmtodModel::new(other_config, fx.model.space.vocab().clone()).unwrap();
    assert!(load_model(&path, &other).is_err());
}

#[test]
fn single_turn_dialogue_predicts_without_history() {
    let fx = fixture(15);
    let tc = TrainConfig { max_epochs: 1, ..Default::default() };
    let (store, _) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    let table = ActionTable::default_table();
    let single = fx
        .corpus
        .test
        .iter()
        .map(|d| emtod::corpus::Dialogue { id: d.id.clone(), turns: d.turns[..1].to_vec() })
        .next()
        .unwrap();
    let pred = predict_dialogue(&fx.model, &store, None, &table, &single).unwrap();
    assert_eq!(pred.probabilities.len(), 13);

    let again = predict_dialogue(&fx.model, &store, None, &table, &single).unwrap();
    assert!(pred
        .probabilities
        .iter()
        .zip(&again.probabilities)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn scopeit_configured_model_requires_stage_one() {
    let corpus = generate(&CorpusConfig { n_dialogues: 5, ..Default::default() }).unwrap();
    let vocab = Vocab::build(&corpus.train, 1).unwrap();
    let mut config = small_model_config();
    config.user_summarizer = UserSummarizerKind::Scopeit;
    let model = EmtodModel::new(config, vocab).unwrap();
    let table = ActionTable::default_table();
    assert!(encode_examples(&corpus.train, &model, None, &table).is_err());
}

#[test]
fn epoch_log_serializes_one_line_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(10);
    let tc = TrainConfig { max_epochs: 2, patience: 5, ..Default::default() };
    let (_store, logs) = train(&fx.model, &fx.train_examples, &fx.val_examples, &tc).unwrap();
    let path = dir.path().join("log.jsonl");
    trainer::write_log_jsonl(&path, &logs).unwrap();
    let body = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body.lines().count(), logs.len());
    for line in body.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("epoch").is_some() && v.get("train_loss").is_some());
        assert!(v.get("val_micro_f1").is_some());
    }
}
