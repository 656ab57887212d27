//! Corpus record types, JSONL serialization, and validation.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::actions::ACTIONS;
use super::intents::INTENTS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sentence {
    pub text: String,
    pub relevant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub role: Role,
    pub speaker_id: String,
    pub sentences: Vec<Sentence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_intents: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambiguous: Option<bool>,
}

impl Turn {
    /// Full turn text: sentences joined with single spaces.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn is_ambiguous(&self) -> bool {
        self.ambiguous.unwrap_or(false)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Indices of user turns — each one is a prediction point.
    pub fn user_turn_indices(&self) -> Vec<usize> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.role == Role::User)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Companion metadata written beside the split files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub intents: Vec<String>,
    pub actions: Vec<String>,
    pub n_dialogues: usize,
    pub seed: u64,
}

impl CorpusMeta {
    pub fn current(n_dialogues: usize, seed: u64) -> Self {
        Self {
            intents: INTENTS.iter().map(|s| s.to_string()).collect(),
            actions: ACTIONS.iter().map(|s| s.to_string()).collect(),
            n_dialogues,
            seed,
        }
    }
}

/// Write one dialogue per line.
pub fn save_jsonl(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for d in dialogues {
        let line = serde_json::to_string(d)
            .map_err(|e| Error::Corpus(format!("serialize {}: {e}", d.id)))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Order-preserving load; parse failures carry the 1-based line number.
pub fn load_jsonl(path: &Path) -> Result<Vec<Dialogue>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Dialogue = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(d);
    }
    Ok(out)
}

/// Check every structural invariant of a dialogue; returns human-readable
/// violations (empty when clean).
pub fn validate_dialogue(d: &Dialogue) -> Vec<String> {
    let mut violations = Vec::new();
    let ctx = &d.id;
    if d.turns.is_empty() {
        violations.push(format!("{ctx}: dialogue has no turns"));
        return violations;
    }
    for (i, turn) in d.turns.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::User } else { Role::Agent };
        if turn.role != expected {
            violations.push(format!(
                "{ctx}: turn {i} must be {expected:?} (turns alternate starting with user)"
            ));
        }
        if turn.sentences.is_empty() {
            violations.push(format!("{ctx}: turn {i} has no sentences"));
        }
        for (j, s) in turn.sentences.iter().enumerate() {
            if s.text.trim().is_empty() {
                violations.push(format!("{ctx}: turn {i} sentence {j} is empty"));
            }
        }
        match turn.role {
            Role::User => {
                match &turn.gold_intents {
                    None => violations.push(format!("{ctx}: user turn {i} missing gold_intents")),
                    Some(intents) => {
                        if intents.is_empty() {
                            violations
                                .push(format!("{ctx}: user turn {i} has empty gold_intents"));
                        }
                        for intent in intents {
                            if !INTENTS.contains(&intent.as_str()) {
                                violations.push(format!(
                                    "{ctx}: user turn {i} has unknown intent `{intent}`"
                                ));
                            }
                        }
                    }
                }
                if turn.gold_action.is_some() {
                    violations.push(format!(
                        "{ctx}: user turn {i} carries gold_action (agent-only field)"
                    ));
                }
            }
            Role::Agent => {
                match &turn.gold_action {
                    None => violations.push(format!("{ctx}: agent turn {i} missing gold_action")),
                    Some(action) => {
                        if !ACTIONS.contains(&action.as_str()) {
                            violations.push(format!(
                                "{ctx}: agent turn {i} has unknown action `{action}`"
                            ));
                        }
                    }
                }
                if turn.gold_intents.is_some() {
                    violations.push(format!(
                        "{ctx}: agent turn {i} carries gold_intents (user-only field)"
                    ));
                }
                if turn.is_ambiguous() {
                    violations
                        .push(format!("{ctx}: agent turn {i} flagged ambiguous (user-only)"));
                }
            }
        }
    }
    violations
}

/// Validate a corpus file (plus optional meta) and return all violations.
pub fn validate_file(path: &Path, meta: Option<&CorpusMeta>) -> Result<Vec<String>> {
    let dialogues = load_jsonl(path)?;
    let mut violations = Vec::new();
    if let Some(meta) = meta {
        if meta.intents.len() != INTENTS.len()
            || meta.intents.iter().zip(INTENTS.iter()).any(|(a, b)| a != b)
        {
            violations.push(format!(
                "meta: intent vocabulary must be the {}-entry canonical schema",
                INTENTS.len()
            ));
        }
        if meta.actions.len() != ACTIONS.len()
            || meta.actions.iter().zip(ACTIONS.iter()).any(|(a, b)| a != b)
        {
            violations.push(format!(
                "meta: action vocabulary must be the {}-entry canonical schema",
                ACTIONS.len()
            ));
        }
    }
    let mut seen_ids = std::collections::BTreeSet::new();
    for d in &dialogues {
        if !seen_ids.insert(d.id.clone()) {
            violations.push(format!("{}: duplicate dialogue id", d.id));
        }
        violations.extend(validate_dialogue(d));
    }
    Ok(violations)
}

pub fn save_meta(path: &Path, meta: &CorpusMeta) -> Result<()> {
    let body = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Corpus(format!("serialize meta: {e}")))?;
    fs::write(path, body + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_meta(path: &Path) -> Result<CorpusMeta> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}
