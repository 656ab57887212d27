//! Command-line driver: corpus generation, stage-1 summarizer training,
//! intent model training, evaluation, prediction, ablation grids, and
//! latency benchmarks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use emtod::agent::ActionTable;
use emtod::aggregator::AggregatorKind;
use emtod::config::RunConfig;
use emtod::corpus::{self, load_jsonl, validate_file, Dialogue, Vocab};
use emtod::error::Error;
use emtod::eval::{benchmark_latency, compute_metrics, format_table, run_ablation, GridEntry};
use emtod::model::{EmtodModel, ModelConfig, ModelKind, UserSummarizerKind};
use emtod::nn::{Checkpoint, ParamStore, Precision};
use emtod::scopeit::{self, ScopeIt};
use emtod::trainer::{
    encode_examples, load_model, predict_all, predict_dialogue, save_model, train,
    write_log_jsonl,
};

#[derive(Parser)]
#[command(name = "emtod", version, about = "Context-aware multi-label intent detection for long-form assistant conversations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregatorArg {
    Concat,
    Attention,
    CrossAttention,
}

impl From<AggregatorArg> for AggregatorKind {
    fn from(a: AggregatorArg) -> Self {
        match a {
            AggregatorArg::Concat => AggregatorKind::Concat,
            AggregatorArg::Attention => AggregatorKind::Attention,
            AggregatorArg::CrossAttention => AggregatorKind::CrossAttention,
        }
    }
}

/// Flags that override fields of the JSON config (flags win).
#[derive(clap::Args, Clone)]
struct Overrides {
    /// Master seed for corpus generation and both training stages
    #[arg(long)]
    seed: Option<u64>,
    /// Fusion strategy for the dual model
    #[arg(long, value_enum)]
    aggregator: Option<AggregatorArg>,
    /// Parameter namespace prefixes excluded from updates (repeatable)
    #[arg(long)]
    freeze: Vec<String>,
    /// Relevance threshold for the sentence summarizer
    #[arg(long)]
    tau: Option<f64>,
    /// Token budget for the agent truncation baseline
    #[arg(long)]
    trunc_len: Option<usize>,
    /// Feed full user turns instead of summarizer output
    #[arg(long)]
    no_summarizer: bool,
    /// Turn-only baseline: drop the conversation history encoder
    #[arg(long)]
    no_context: bool,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.override_seed(seed);
        }
        if let Some(aggregator) = self.aggregator {
            config.model.aggregator = aggregator.into();
        }
        if !self.freeze.is_empty() {
            config.train.freeze = self.freeze.clone();
        }
        if let Some(tau) = self.tau {
            config.scopeit.tau = tau;
        }
        if let Some(trunc_len) = self.trunc_len {
            config.model.trunc_len = trunc_len;
        }
        if self.no_summarizer {
            config.model.user_summarizer = UserSummarizerKind::None;
        }
        if self.no_context {
            config.model.kind = ModelKind::TurnOnly;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus: train/val/test JSONL, vocabulary,
    /// metadata, and the default action table
    GenCorpus {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the corpus files
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the stage-1 sentence-relevance summarizer
    TrainScopeit {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus directory from gen-corpus
        #[arg(long)]
        data: PathBuf,
        /// Output directory for scopeit.ckpt and scopeit_log.jsonl
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the intent model end to end
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Stage-1 checkpoint (required unless --no-summarizer or the
        /// config disables the user summarizer)
        #[arg(long)]
        scopeit: Option<PathBuf>,
        /// Output directory for emtod.ckpt and train_log.jsonl
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint on a corpus split
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scopeit: Option<PathBuf>,
        /// Which split to evaluate: train, val, or test
        #[arg(long, default_value = "test")]
        split: String,
        /// Metrics JSON output path
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Predict intents for the final user turn of one conversation
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A single dialogue as JSON
        #[arg(long)]
        conversation: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scopeit: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train and evaluate a grid of configurations across seeds
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// JSON list of {name, model, train} entries
        #[arg(long)]
        grid: PathBuf,
        /// Comma-separated seeds, e.g. 1,2,3
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long)]
        scopeit: Option<PathBuf>,
        /// Results JSON output path
        #[arg(long, default_value = "ablation.json")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Time batch-1 inference for single- and dual-encoder configurations
    BenchLatency {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Report JSON output path
        #[arg(long, default_value = "latency.json")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::UnknownParam(_) | Error::DuplicateParam(_) => 1,
        Error::Parse { .. } | Error::Corpus(_) | Error::Io { .. } | Error::Checkpoint(_) => 2,
        Error::Shape { .. } | Error::NonDeterministic { .. } | Error::Train(_) => 3,
    }
}

fn load_config(path: &Option<PathBuf>, overrides: &Overrides) -> Result<RunConfig, Error> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

struct CorpusDir {
    train: Vec<Dialogue>,
    val: Vec<Dialogue>,
    test: Vec<Dialogue>,
    vocab: Vocab,
}

fn load_corpus_dir(dir: &Path) -> Result<CorpusDir, Error> {
    let meta = corpus::load_meta(&dir.join("meta.json")).ok();
    for split in ["train.jsonl", "val.jsonl", "test.jsonl"] {
        let violations = validate_file(&dir.join(split), meta.as_ref())?;
        if !violations.is_empty() {
            return Err(Error::Corpus(format!(
                "{split} has {} violations; first: {}",
                violations.len(),
                violations[0]
            )));
        }
    }
    Ok(CorpusDir {
        train: load_jsonl(&dir.join("train.jsonl"))?,
        val: load_jsonl(&dir.join("val.jsonl"))?,
        test: load_jsonl(&dir.join("test.jsonl"))?,
        vocab: Vocab::load(&dir.join("vocab.txt"))?,
    })
}

fn load_scopeit(
    config: &RunConfig,
    vocab: &Vocab,
    path: &Option<PathBuf>,
) -> Result<Option<(ScopeIt, ParamStore)>, Error> {
    if config.model.user_summarizer != UserSummarizerKind::Scopeit {
        return Ok(None);
    }
    let path = path.as_ref().ok_or_else(|| {
        Error::Config(
            "the configured model needs a stage-1 summarizer: pass --scopeit PATH or --no-summarizer"
                .to_string(),
        )
    })?;
    let model = ScopeIt::new(config.scopeit.clone(), vocab.len());
    let checkpoint = Checkpoint::load(path)?;
    checkpoint.expect_digest(&emtod::model::scopeit_digest(&config.scopeit, vocab))?;
    let mut store = ParamStore::new(Precision::F32);
    model.register(&mut store, 0)?;
    checkpoint.apply(&mut store)?;
    Ok(Some((model, store)))
}

fn action_table(data: &Path) -> Result<ActionTable, Error> {
    let path = data.join("action_table.json");
    if path.exists() {
        ActionTable::load(&path)
    } else {
        Ok(ActionTable::default_table())
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::GenCorpus { config, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let generated = corpus::generate_to_dir(&config.corpus, &out)?;
            println!(
                "wrote {} dialogues (train {}, val {}, test {}) to {}",
                generated.total(),
                generated.train.len(),
                generated.val.len(),
                generated.test.len(),
                out.display()
            );
            println!("files: train.jsonl val.jsonl test.jsonl vocab.txt meta.json action_table.json");
            Ok(())
        }

        Command::TrainScopeit { config, data, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let model = ScopeIt::new(config.scopeit.clone(), dir.vocab.len());
            let (store, logs) =
                scopeit::train_scopeit(&model, &dir.train, &dir.val, &dir.vocab, &config.scopeit_train)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
            let digest = emtod::model::scopeit_digest(&config.scopeit, &dir.vocab);
            Checkpoint::from_store(&store, digest).save(&out.join("scopeit.ckpt"))?;
            let log_body: String = logs
                .iter()
                .map(|l| serde_json::to_string(l).unwrap() + "\n")
                .collect();
            std::fs::write(out.join("scopeit_log.jsonl"), log_body)
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            let best = logs.iter().map(|l| l.val_f1).fold(f64::NEG_INFINITY, f64::max);
            println!(
                "summarizer trained: {} epochs, best val sentence-F1 {:.4}",
                logs.len(),
                best
            );
            println!("checkpoint: {}", out.join("scopeit.ckpt").display());
            Ok(())
        }

        Command::Train { config, data, scopeit, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let table = action_table(&data)?;
            let stage1 = load_scopeit(&config, &dir.vocab, &scopeit)?;
            let stage1_ref = stage1.as_ref().map(|(m, s)| (m, s));

            let model = EmtodModel::new(config.model.clone(), dir.vocab.clone())?;
            let train_examples = encode_examples(&dir.train, &model, stage1_ref, &table)?;
            let val_examples = encode_examples(&dir.val, &model, stage1_ref, &table)?;
            println!(
                "training on {} prediction points ({} validation)",
                train_examples.len(),
                val_examples.len()
            );
            let (store, logs) = train(&model, &train_examples, &val_examples, &config.train)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
            save_model(&out.join("emtod.ckpt"), &model, &store)?;
            write_log_jsonl(&out.join("train_log.jsonl"), &logs)?;
            let best = logs.iter().map(|l| l.val_micro_f1).fold(f64::NEG_INFINITY, f64::max);
            println!("trained {} epochs, best val micro-F1 {:.4}", logs.len(), best);
            println!("checkpoint: {}", out.join("emtod.ckpt").display());
            Ok(())
        }

        Command::Evaluate { config, data, checkpoint, scopeit, split, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let table = action_table(&data)?;
            let stage1 = load_scopeit(&config, &dir.vocab, &scopeit)?;
            let stage1_ref = stage1.as_ref().map(|(m, s)| (m, s));

            let dialogues = match split.as_str() {
                "train" => &dir.train,
                "val" => &dir.val,
                "test" => &dir.test,
                other => {
                    return Err(Error::Config(format!(
                        "unknown split `{other}` (expected train, val, or test)"
                    )))
                }
            };
            let model = EmtodModel::new(config.model.clone(), dir.vocab.clone())?;
            let store = load_model(&checkpoint, &model)?;
            let examples = encode_examples(dialogues, &model, stage1_ref, &table)?;
            let preds = predict_all(&model, &store, &examples)?;
            let pred_hot: Vec<Vec<f64>> = preds.iter().map(|p| p.multi_hot()).collect();
            let gold: Vec<Vec<f64>> = examples.iter().map(|e| e.targets.clone()).collect();
            let overall = compute_metrics(&pred_hot, &gold)?;

            let amb_pred: Vec<Vec<f64>> = examples
                .iter()
                .zip(&pred_hot)
                .filter(|(e, _)| e.ambiguous)
                .map(|(_, p)| p.clone())
                .collect();
            let amb_gold: Vec<Vec<f64>> = examples
                .iter()
                .filter(|e| e.ambiguous)
                .map(|e| e.targets.clone())
                .collect();
            let ambiguous = if amb_gold.is_empty() {
                None
            } else {
                Some(compute_metrics(&amb_pred, &amb_gold)?)
            };

            let report = serde_json::json!({
                "split": split,
                "n_examples": overall.n_examples,
                "overall": overall,
                "ambiguous_subset": ambiguous,
            });
            std::fs::write(&out, serde_json::to_string_pretty(&report).unwrap() + "\n")
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            println!(
                "{split}: micro-F1 {:.4}  macro-F1 {:.4}  micro-P {:.4}  macro-P {:.4}  acc {:.4}  (exact-match accuracy, n={})",
                overall.micro_f1,
                overall.macro_f1,
                overall.micro_precision,
                overall.macro_precision,
                overall.accuracy,
                overall.n_examples
            );
            if let Some(amb) = &ambiguous {
                println!(
                    "ambiguous subset: micro-F1 {:.4} (n={})",
                    amb.micro_f1, amb.n_examples
                );
            }
            println!("report: {}", out.display());
            Ok(())
        }

        Command::Predict { config, conversation, checkpoint, scopeit, data, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let table = action_table(&data)?;
            let stage1 = load_scopeit(&config, &dir.vocab, &scopeit)?;
            let stage1_ref = stage1.as_ref().map(|(m, s)| (m, s));

            let body = std::fs::read_to_string(&conversation)
                .map_err(|e| Error::io(conversation.display().to_string(), e))?;
            let dialogue: Dialogue = serde_json::from_str(&body).map_err(|e| Error::Parse {
                path: conversation.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;

            let model = EmtodModel::new(config.model.clone(), dir.vocab.clone())?;
            let store = load_model(&checkpoint, &model)?;
            let prediction = predict_dialogue(&model, &store, stage1_ref, &table, &dialogue)?;

            let probabilities: Vec<serde_json::Value> = emtod::corpus::INTENTS
                .iter()
                .zip(&prediction.probabilities)
                .map(|(intent, p)| serde_json::json!({"intent": intent, "probability": p}))
                .collect();
            let output = serde_json::json!({
                "dialogue_id": dialogue.id,
                "probabilities": probabilities,
                "predicted_intents": prediction.predicted_intents,
            });
            println!("{}", serde_json::to_string_pretty(&output).unwrap());
            Ok(())
        }

        Command::Ablate { config, data, grid, seeds, scopeit, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let table = action_table(&data)?;
            let stage1 = load_scopeit(&config, &dir.vocab, &scopeit)?;
            let stage1_ref = stage1.as_ref().map(|(m, s)| (m, s));

            let body = std::fs::read_to_string(&grid)
                .map_err(|e| Error::io(grid.display().to_string(), e))?;
            let entries: Vec<GridEntry> = serde_json::from_str(&body).map_err(|e| Error::Parse {
                path: grid.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
            let seeds: Vec<u64> = seeds
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad seed `{s}`")))
                })
                .collect::<Result<_, _>>()?;

            let rows = run_ablation(
                &entries,
                &dir.train,
                &dir.val,
                &dir.test,
                &dir.vocab,
                stage1_ref,
                &table,
                &seeds,
            )?;
            std::fs::write(&out, serde_json::to_string_pretty(&rows).unwrap() + "\n")
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            print!("{}", format_table(&entries, &rows));
            println!("results: {}", out.display());
            Ok(())
        }

        Command::BenchLatency { config, data, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let dir = load_corpus_dir(&data)?;
            let table = action_table(&data)?;
            let sample = dir
                .test
                .first()
                .or(dir.train.first())
                .ok_or_else(|| Error::Corpus("corpus has no dialogues to sample".to_string()))?;

            // isolate encoder cost: full user turns, tagged agent turns
            let base = ModelConfig {
                user_summarizer: UserSummarizerKind::None,
                ..config.model.clone()
            };
            let entries = vec![
                (
                    "turn_only".to_string(),
                    ModelConfig { kind: ModelKind::TurnOnly, ..base.clone() },
                ),
                (
                    "dialogue_only".to_string(),
                    ModelConfig { kind: ModelKind::DialogueOnly, ..base.clone() },
                ),
                (
                    format!("dual_{}", base.aggregator),
                    ModelConfig { kind: ModelKind::Dual, ..base },
                ),
            ];
            let report = benchmark_latency(
                &entries,
                &dir.vocab,
                sample,
                None,
                &table,
                config.train.seed,
            )?;
            std::fs::write(&out, serde_json::to_string_pretty(&report).unwrap() + "\n")
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            println!(
                "{:<24} {:>12} {:>12}",
                "configuration", "params", "mean latency"
            );
            for c in &report.configs {
                println!(
                    "{:<24} {:>12} {:>11.3}ms",
                    c.name,
                    c.params.total,
                    c.mean_s * 1000.0
                );
            }
            println!("report: {}", out.display());
            Ok(())
        }
    }
}
