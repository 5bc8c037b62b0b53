//! Experiment configuration: defaults, JSON config files and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{LogRegConfig, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};
use crate::harness::{EmbeddingSource, ExperimentSettings};
use crate::model::{GateKind, ModelConfig};
use crate::text::DEFAULT_MAX_VOCAB;
use crate::train::{TrainConfig, DEFAULT_EPOCHS, DEFAULT_EPS, DEFAULT_MIN_DELTA, DEFAULT_PATIENCE, DEFAULT_RHO};

/// All tunable settings of a run. Defaults give 100 filters per width 3, 4
/// and 5 over 300-d static embeddings, batch size 16, up to 50 epochs with
/// patience 10.
///
/// Config files are JSON objects with any subset of these keys; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub gate: GateKind,
    pub kernel_sizes: Vec<usize>,
    pub filters: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout_embed: f64,
    pub dropout_dense: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping.
    pub patience: usize,
    pub rho: f64,
    pub eps: f64,
    pub seed: u64,
    /// Seeds per matrix cell: `seed, seed + 1, ...`.
    pub runs: usize,
    pub train_embeddings: bool,
    pub embeddings: Option<PathBuf>,
    pub min_freq: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let m = ModelConfig::standard(GateKind::Glu);
        Self {
            gate: m.gate,
            kernel_sizes: m.kernel_sizes,
            filters: m.filters,
            embed_dim: m.embed_dim,
            max_len: m.max_len,
            vocab_size: DEFAULT_MAX_VOCAB,
            dropout_embed: m.dropout_embed,
            dropout_dense: m.dropout_dense,
            batch_size: 16,
            epochs: DEFAULT_EPOCHS,
            patience: DEFAULT_PATIENCE,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            seed: 0,
            runs: 5,
            train_embeddings: m.train_embeddings,
            embeddings: None,
            min_freq: DEFAULT_MIN_FREQ,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("filters", self.filters),
            ("embedDim", self.embed_dim),
            ("maxLen", self.max_len),
            ("vocabSize", self.vocab_size),
            ("batchSize", self.batch_size),
            ("epochs", self.epochs),
            ("runs", self.runs),
            ("minFreq", self.min_freq),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("rho must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            gate: self.gate,
            kernel_sizes: self.kernel_sizes.clone(),
            filters: self.filters,
            embed_dim: self.embed_dim,
            max_len: self.max_len,
            dropout_embed: self.dropout_embed,
            dropout_dense: self.dropout_dense,
            train_embeddings: self.train_embeddings,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: (self.patience > 0).then_some(self.patience),
            min_delta: DEFAULT_MIN_DELTA,
            rho: self.rho,
            eps: self.eps,
            seed: self.seed,
        }
    }

    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            model: self.model_config(),
            train: self.train_config(),
            vocab_size: self.vocab_size,
            embeddings: match &self.embeddings {
                Some(p) => EmbeddingSource::File(p.clone()),
                None => EmbeddingSource::Random,
            },
            min_freq: self.min_freq,
            logreg: LogRegConfig::default(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }
}
