//! Bag-of-words and TF-IDF logistic-regression baselines.

mod features;
mod logreg;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    bow_features, document_frequencies, idf, tfidf_features, BowVocab, SparseFeatureVector, DEFAULT_MIN_FREQ,
};
pub use logreg::{logreg_fit, FeatureKind, LogRegConfig, LogRegModel};

/// A fitted baseline: feature extractor state plus classifier, serializable
/// as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub vocab: BowVocab,
    pub doc_freqs: Vec<usize>,
    pub n_docs: usize,
    pub model: LogRegModel,
}

impl Baseline {
    /// Builds the vocabulary and document frequencies from `docs` and fits the
    /// classifier on them.
    pub fn train(
        docs: &[Vec<String>],
        labels: &[u8],
        kind: FeatureKind,
        min_freq: usize,
        config: &LogRegConfig,
    ) -> Result<(Self, Vec<f64>)> {
        let vocab = BowVocab::build(docs, min_freq);
        let doc_freqs = document_frequencies(docs, &vocab);
        let mut b = Self {
            vocab,
            doc_freqs,
            n_docs: docs.len(),
            model: LogRegModel::zeros(0, kind),
        };
        let features = docs.iter().map(|d| b.features(d)).collect::<Result<Vec<_>>>()?;
        let (model, trace) = logreg_fit(&features, labels, b.vocab.len(), kind, config)?;
        b.model = model;
        Ok((b, trace))
    }

    pub fn features<S: AsRef<str>>(&self, tokens: &[S]) -> Result<SparseFeatureVector> {
        match self.model.feature_kind {
            FeatureKind::Bow => Ok(bow_features(tokens, &self.vocab)),
            FeatureKind::Tfidf => tfidf_features(tokens, &self.vocab, &self.doc_freqs, self.n_docs),
        }
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<u8> {
        self.model.predict(&self.features(tokens)?)
    }

    pub fn accuracy(&self, docs: &[Vec<String>], labels: &[u8]) -> Result<f64> {
        if docs.is_empty() || docs.len() != labels.len() {
            return Err(Error::invalid("accuracy needs matching, non-empty docs and labels"));
        }
        let mut correct = 0;
        for (d, &y) in docs.iter().zip(labels) {
            correct += usize::from(self.predict(d)? == y);
        }
        Ok(correct as f64 / docs.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(json)?;
        if b.model.weights.len() != b.vocab.len() || b.doc_freqs.len() != b.vocab.len() {
            return Err(Error::Invalid("baseline dimensions disagree with its vocabulary".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Term → weight, for inspection.
    pub fn term_weights(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (t, i) in self.vocab.iter() {
            out.insert(t.to_string(), self.model.weights[i as usize]);
        }
        out
    }
}
