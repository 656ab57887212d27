//! Synthetic multi-party scheduling corpus: schema, generation, validation,
//! vocabulary.

pub mod actions;
pub mod generator;
pub mod intents;
pub mod schema;
pub mod templates;
pub mod vocab;

pub use generator::{generate, generate_to_dir, CorpusConfig, GeneratedCorpus, SplitFractions};
pub use intents::{intent_index, multi_hot, predicted_set, INTENTS, N_INTENTS};
pub use schema::{
    load_jsonl, load_meta, save_jsonl, save_meta, validate_dialogue, validate_file, CorpusMeta,
    Dialogue, Role, Sentence, Turn,
};
pub use templates::Augmentation;
pub use vocab::{tokenize, Vocab};
