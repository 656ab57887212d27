//! Whitespace/punctuation tokenizer and corpus vocabulary.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::schema::Dialogue;
use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const USR: &str = "[USR]";
pub const SYS: &str = "[SYS]";

pub const SPECIALS: [&str; 6] = [PAD, UNK, CLS, SEP, USR, SYS];

/// Lowercase tokens: alphanumeric runs, plus each punctuation mark as its
/// own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from the training split only: specials first, then tokens with
    /// frequency >= min_freq ordered by frequency desc, ties lexicographic.
    pub fn build(dialogues: &[Dialogue], min_freq: usize) -> Result<Self> {
        if dialogues.is_empty() {
            return Err(Error::Corpus("cannot build a vocabulary from an empty corpus".to_string()));
        }
        let mut freq: HashMap<String, usize> = HashMap::new();
        for d in dialogues {
            for turn in &d.turns {
                for sentence in &turn.sentences {
                    for tok in tokenize(&sentence.text) {
                        *freq.entry(tok).or_insert(0) += 1;
                    }
                }
            }
        }
        let mut ranked: Vec<(String, usize)> =
            freq.into_iter().filter(|(_, c)| *c >= min_freq.max(1)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.unk_id())
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn unk_id(&self) -> usize {
        1
    }

    pub fn cls_id(&self) -> usize {
        2
    }

    pub fn sep_id(&self) -> usize {
        3
    }

    pub fn usr_id(&self) -> usize {
        4
    }

    pub fn sys_id(&self) -> usize {
        5
    }

    /// Tokenize and map to ids, [UNK] for unseen tokens.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// One token per line; the zero-based line index is the token id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = self.tokens.join("\n") + "\n";
        fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let tokens: Vec<String> = body.lines().map(|l| l.to_string()).collect();
        if tokens.len() < SPECIALS.len()
            || SPECIALS.iter().enumerate().any(|(i, s)| tokens[i] != *s)
        {
            return Err(Error::Corpus(format!(
                "vocabulary file {} does not start with the special tokens",
                path.display()
            )));
        }
        Ok(Self::from_tokens(tokens))
    }

    /// Content digest input: the exact file body.
    pub fn file_body(&self) -> String {
        self.tokens.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::schema::{Role, Sentence, Turn};

    fn one_sentence_corpus(text: &str) -> Vec<Dialogue> {
        vec![Dialogue {
            id: "d0".to_string(),
            turns: vec![Turn {
                role: Role::User,
                speaker_id: "u".to_string(),
                sentences: vec![Sentence { text: text.to_string(), relevant: true }],
                gold_intents: Some(vec!["no_action".to_string()]),
                gold_action: None,
                ambiguous: Some(false),
            }],
        }]
    }

    #[test]
    fn tokenizer_splits_words_and_punctuation() {
        assert_eq!(tokenize("Hi, Bob!"), vec!["hi", ",", "bob", "!"]);
        assert_eq!(tokenize("4:30 pm"), vec!["4", ":", "30", "pm"]);
    }

    #[test]
    fn tiny_vocab_is_specials_plus_tokens() {
        let vocab = Vocab::build(&one_sentence_corpus("hello hello world"), 1).unwrap();
        assert_eq!(vocab.len(), SPECIALS.len() + 2);
        assert_eq!(vocab.token(SPECIALS.len()), "hello"); // freq 2 first
        assert_eq!(vocab.token(SPECIALS.len() + 1), "world");
    }

    #[test]
    fn unseen_token_maps_to_unk() {
        let vocab = Vocab::build(&one_sentence_corpus("hello world"), 1).unwrap();
        assert_eq!(vocab.id("galaxy"), vocab.unk_id());
    }

    #[test]
    fn vocab_round_trips_and_is_deterministic() {
        let corpus = one_sentence_corpus("b a a c b a");
        let v1 = Vocab::build(&corpus, 1).unwrap();
        let v2 = Vocab::build(&corpus, 1).unwrap();
        assert_eq!(v1.file_body(), v2.file_body());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v1.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(loaded.file_body(), v1.file_body());
        // a (freq 3), b (freq 2), c (freq 1)
        assert_eq!(loaded.token(6), "a");
        assert_eq!(loaded.token(7), "b");
        assert_eq!(loaded.token(8), "c");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Vocab::build(&[], 1).is_err());
    }
}
