//! Agent turn summarization: pattern-table action tagging, plus a
//! truncation baseline.

use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::actions::{ACTIONS, FALLBACK_ACTION};
use crate::corpus::templates::ACTION_PATTERNS;
use crate::corpus::vocab::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatternEntry {
    pattern: String,
    tag: String,
}

/// Ordered pattern list; the first matching pattern's tag wins, and text
/// matching nothing maps to the reserved `other_action`.
#[derive(Debug)]
pub struct ActionTable {
    entries: Vec<(Regex, String)>,
}

impl ActionTable {
    pub fn new(pairs: &[(&str, &str)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(pairs.len());
        for (pattern, tag) in pairs {
            if !ACTIONS.contains(tag) {
                return Err(Error::Config(format!(
                    "action table tag `{tag}` is outside the {}-action vocabulary",
                    ACTIONS.len()
                )));
            }
            let re = Regex::new(pattern)
                .map_err(|e| Error::Config(format!("bad pattern `{pattern}`: {e}")))?;
            entries.push((re, tag.to_string()));
        }
        Ok(Self { entries })
    }

    /// The table co-designed with the corpus templates.
    pub fn default_table() -> Self {
        Self::new(ACTION_PATTERNS).expect("built-in patterns are valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let entries: Vec<PatternEntry> = self
            .entries
            .iter()
            .map(|(re, tag)| PatternEntry { pattern: re.as_str().to_string(), tag: tag.clone() })
            .collect();
        let body = serde_json::to_string_pretty(&entries)
            .map_err(|e| Error::Config(format!("serialize action table: {e}")))?;
        fs::write(path, body + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let entries: Vec<PatternEntry> = serde_json::from_str(&body).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let pairs: Vec<(&str, &str)> = entries
            .iter()
            .map(|e| (e.pattern.as_str(), e.tag.as_str()))
            .collect();
        Self::new(&pairs)
    }
}

/// Summarize an agent turn to its action tag: first matching pattern wins,
/// `other_action` when nothing matches.
pub fn summarize_agent_turn(text: &str, table: &ActionTable) -> String {
    for (re, tag) in &table.entries {
        if re.is_match(text) {
            return tag.clone();
        }
    }
    FALLBACK_ACTION.to_string()
}

/// Truncation baseline: the first `max_tokens` tokens in original order.
pub fn truncate_agent_turn(text: &str, max_tokens: usize) -> String {
    let tokens = tokenize(text);
    tokens[..tokens.len().min(max_tokens.max(1))].join(" ")
}
