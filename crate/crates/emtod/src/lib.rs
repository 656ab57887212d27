//! EMToD: intent detection for long-form, multi-party assistant conversations.
//!
//! The pipeline summarizes each turn of a conversation (relevant sentences
//! for user turns, an action tag for assistant turns), encodes the summarized
//! history and the raw last user turn with two separate encoders, fuses the
//! two embeddings (concatenation, attention, or cross-attention), and
//! predicts a multi-label intent set. The crate also ships a synthetic
//! scheduling-assistant corpus generator and an evaluation harness so the
//! whole stack can be trained and measured end to end on a laptop.

pub mod agent;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod aggregator;
pub mod config;
pub mod context;
pub mod scopeit;
pub mod trainer;

pub use error::{Error, Result};
