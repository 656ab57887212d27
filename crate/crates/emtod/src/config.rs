//! Merged run configuration: corpus, summarizer, model, and training
//! settings loaded from one JSON file. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::scopeit::{ScopeItConfig, ScopeItTrainConfig};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub scopeit: ScopeItConfig,
    pub scopeit_train: ScopeItTrainConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = serde_json::from_str(&body).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.scopeit.tau) {
            return Err(Error::Config(format!(
                "scopeit.tau must be in [0, 1], got {}",
                self.scopeit.tau
            )));
        }
        Ok(())
    }

    /// Point every stage's seed at one value (the --seed override).
    pub fn override_seed(&mut self, seed: u64) {
        self.corpus.seed = seed;
        self.scopeit_train.seed = seed;
        self.train.seed = seed;
    }
}
