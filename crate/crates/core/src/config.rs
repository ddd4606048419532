//! Every tunable of a run in one serializable record.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::validate_tag;
use crate::ast2vec::SkipGramConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pipeline::TrainConfig;

pub const DEFAULT_LABELS: [&str; 6] = ["ms", "bs", "qs", "ll", "bfs", "kns"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Pre-train node-type vectors before the classifier; random otherwise.
    pub pretrain: bool,
    pub epochs: usize,
    pub lr: f64,
    /// Keep the vectors fixed while training the classifier.
    pub freeze: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let sg = SkipGramConfig::default();
        Self {
            pretrain: true,
            epochs: sg.epochs,
            lr: sg.lr,
            freeze: false,
        }
    }
}

impl EmbeddingConfig {
    pub fn skip_gram(&self) -> SkipGramConfig {
        SkipGramConfig {
            epochs: self.epochs,
            lr: self.lr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_similar: usize,
    pub n_dissimilar: usize,
    pub detection_queries: usize,
    pub references_per_label: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_similar: 2000,
            n_dissimilar: 2000,
            detection_queries: 1000,
            references_per_label: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub labels: Vec<String>,
    pub train_ratio: f64,
    pub model: ModelConfig,
    pub embeddings: EmbeddingConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            train_ratio: 0.7,
            model: ModelConfig::default(),
            embeddings: EmbeddingConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Config("label set is empty".into()));
        }
        for (i, l) in self.labels.iter().enumerate() {
            validate_tag("label", l).map_err(|e| Error::Config(e.to_string()))?;
            if self.labels[..i].contains(l) {
                return Err(Error::Config(format!("label `{l}` listed twice")));
            }
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "train_ratio must lie in (0, 1), got {}",
                self.train_ratio
            )));
        }
        self.model.validate()?;
        self.train.validate()?;
        if self.embeddings.pretrain && !(self.embeddings.lr > 0.0 && self.embeddings.lr.is_finite())
        {
            return Err(Error::Config(format!(
                "embedding lr must be positive, got {}",
                self.embeddings.lr
            )));
        }
        if self.eval.references_per_label == 0 {
            return Err(Error::Config(
                "references_per_label must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
