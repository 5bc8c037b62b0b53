use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{Baseline, FeatureKind, LogRegConfig, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};
use crate::model::{init_model, predict, GateKind, GcnParams, ModelConfig};
use crate::rng::Rng;
use crate::text::{load_embeddings, random_embeddings, DomainDataset, EncodedExample, Review, Split, Vocabulary};
use crate::train::{fit, TrainConfig, TrainReport};

/// A model family the harness can train: a gated (or plain) CNN, or a linear
/// baseline over sparse features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Gcn(GateKind),
    Baseline(FeatureKind),
}

impl ModelSpec {
    pub fn name(self) -> &'static str {
        match self {
            ModelSpec::Gcn(g) => g.name(),
            ModelSpec::Baseline(k) => k.name(),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bow" => Ok(ModelSpec::Baseline(FeatureKind::Bow)),
            "tfidf" | "tf-idf" => Ok(ModelSpec::Baseline(FeatureKind::Tfidf)),
            other => other
                .parse::<GateKind>()
                .map(ModelSpec::Gcn)
                .map_err(|_| Error::invalid(format!("unknown model {s:?} (glu, gtu, gtru, none, bow, tfidf)"))),
        }
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Glorot-uniform rows drawn from the run seed.
    Random,
    /// Whitespace-separated text vectors, one word per line.
    File(PathBuf),
}

/// Everything except the model family and seed needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Network shape; the gate is replaced by the one in [`ModelSpec`].
    pub model: ModelConfig,
    /// Optimizer and schedule; the seed is replaced by the run seed.
    pub train: TrainConfig,
    pub vocab_size: usize,
    pub embeddings: EmbeddingSource,
    pub min_freq: usize,
    pub logreg: LogRegConfig,
}

impl ExperimentSettings {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        Self {
            model,
            train,
            vocab_size: crate::text::DEFAULT_MAX_VOCAB,
            embeddings: EmbeddingSource::Random,
            min_freq: DEFAULT_MIN_FREQ,
            logreg: LogRegConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Gcn {
        params: GcnParams,
        vocab: Vocabulary,
        report: TrainReport,
    },
    Baseline(Baseline),
}

impl TrainedModel {
    pub fn accuracy(&self, reviews: &[&Review]) -> Result<f64> {
        if reviews.is_empty() {
            return Err(Error::invalid("accuracy on an empty split"));
        }
        let labels: Vec<u8> = reviews.iter().map(|r| r.label).collect();
        match self {
            TrainedModel::Gcn { params, vocab, .. } => {
                let encoded = encode(vocab, reviews, params.config.max_len);
                let mut correct = 0;
                for (chunk, ys) in encoded.chunks(256).zip(labels.chunks(256)) {
                    for (p, y) in predict(params, chunk)?.into_iter().zip(ys) {
                        correct += usize::from(p == *y);
                    }
                }
                Ok(correct as f64 / reviews.len() as f64)
            }
            TrainedModel::Baseline(b) => {
                let docs: Vec<Vec<String>> = reviews.iter().map(|r| r.tokens.clone()).collect();
                b.accuracy(&docs, &labels)
            }
        }
    }

    /// Training seconds per epoch; empty for baselines.
    pub fn epoch_seconds(&self) -> Vec<f64> {
        match self {
            TrainedModel::Gcn { report, .. } => report.epochs.iter().map(|e| e.seconds).collect(),
            TrainedModel::Baseline(_) => Vec::new(),
        }
    }
}

pub fn encode(vocab: &Vocabulary, reviews: &[&Review], max_len: usize) -> Vec<EncodedExample> {
    reviews
        .iter()
        .map(|r| vocab.encode(&r.tokens, r.label, max_len))
        .collect()
}

/// Fits `spec` on the source training split, selecting by the source
/// validation split. Vocabulary and features come from the training split only.
pub fn train_on_source(
    source: &DomainDataset,
    spec: ModelSpec,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<TrainedModel> {
    let train = source.split(Split::Train);
    if train.is_empty() {
        return Err(Error::invalid(format!("domain {} has an empty training split", source.domain())));
    }
    match spec {
        ModelSpec::Gcn(gate) => {
            let val = source.split(Split::Val);
            let vocab = Vocabulary::build(train.iter().map(|r| &r.tokens), settings.vocab_size);
            let config = ModelConfig {
                gate,
                ..settings.model.clone()
            };
            let root = Rng::new(seed);
            let embedding = match &settings.embeddings {
                EmbeddingSource::Random => random_embeddings(&vocab, config.embed_dim, &mut root.fork(7))?,
                EmbeddingSource::File(path) => load_embeddings(path, &vocab, config.embed_dim)?,
            };
            let params = init_model(&config, &vocab, embedding, &mut root.clone())?;
            let tc = TrainConfig {
                seed,
                ..settings.train.clone()
            };
            let (params, report) = fit(
                params,
                &encode(&vocab, &train, config.max_len),
                &encode(&vocab, &val, config.max_len),
                &tc,
            )?;
            Ok(TrainedModel::Gcn { params, vocab, report })
        }
        ModelSpec::Baseline(kind) => {
            let docs: Vec<Vec<String>> = train.iter().map(|r| r.tokens.clone()).collect();
            let labels: Vec<u8> = train.iter().map(|r| r.label).collect();
            let (b, _) = Baseline::train(&docs, &labels, kind, settings.min_freq, &settings.logreg)?;
            Ok(TrainedModel::Baseline(b))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Train on the source, test on a different target domain.
    CrossDomain,
    /// Train and test on the same domain. Reported apart from transfer results.
    InDomainSanity,
}

#[derive(Debug, Clone)]
pub struct PairResult {
    pub source: String,
    pub target: String,
    pub model: ModelSpec,
    pub seed: u64,
    pub mode: PairMode,
    /// Fraction of the target test split classified correctly.
    pub accuracy: f64,
    pub trained: TrainedModel,
}

/// Trains on `source` and measures accuracy on the test split of `target`.
///
/// In cross-domain mode the two datasets must not share document ids, and the
/// target's training and validation splits must not be read; the read
/// counters are checked before returning.
pub fn run_pair(
    source: &DomainDataset,
    target: &DomainDataset,
    spec: ModelSpec,
    settings: &ExperimentSettings,
    seed: u64,
    mode: PairMode,
) -> Result<PairResult> {
    if mode == PairMode::CrossDomain {
        let ids: HashSet<&str> = source.ids().collect();
        if let Some(dup) = target.ids().find(|id| ids.contains(id)) {
            return Err(Error::Invalid(format!(
                "document id {dup:?} occurs in both {} and {}",
                source.domain(),
                target.domain()
            )));
        }
    } else if !std::ptr::eq(source, target) {
        return Err(Error::invalid("in-domain sanity mode needs the same dataset as source and target"));
    }
    let guarded = [Split::Train, Split::Val].map(|s| target.reads(s));

    let trained = train_on_source(source, spec, settings, seed)?;
    let accuracy = trained.accuracy(&target.split(Split::Test))?;

    if mode == PairMode::CrossDomain && [Split::Train, Split::Val].map(|s| target.reads(s)) != guarded {
        return Err(Error::Invalid(format!(
            "target domain {} training or validation data was read during the run",
            target.domain()
        )));
    }
    Ok(PairResult {
        source: source.domain().to_string(),
        target: target.domain().to_string(),
        model: spec,
        seed,
        mode,
        accuracy,
        trained,
    })
}
