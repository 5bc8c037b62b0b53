use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_FREQ: usize = 5;

/// Sparse vector with strictly increasing indices and finite values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseFeatureVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseFeatureVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::shape(format!(
                "{} indices vs {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sparse indices must be strictly increasing"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("sparse values must be finite"));
        }
        Ok(Self { indices, values })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Largest index plus one, or 0 when empty.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn from_counts(counts: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = counts.into_iter().unzip();
        Self { indices, values }
    }
}

/// Terms seen at least `min_freq` times in the training documents, indexed in
/// lexicographic order from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVocab {
    terms: BTreeMap<String, u32>,
}

impl BowVocab {
    pub fn build<I, D>(docs: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[String]>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            for t in doc.as_ref() {
                *counts.entry(t.clone()).or_default() += 1;
            }
        }
        let mut kept: Vec<String> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_freq)
            .map(|(t, _)| t)
            .collect();
        kept.sort();
        let terms = kept.into_iter().enumerate().map(|(i, t)| (t, i as u32)).collect();
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.terms.get(term).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.terms.iter().map(|(t, &i)| (t.as_str(), i))
    }
}

/// Raw counts of in-vocabulary terms; others are dropped.
pub fn bow_features<S: AsRef<str>>(tokens: &[S], vocab: &BowVocab) -> SparseFeatureVector {
    let mut counts = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.get(t.as_ref()) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    SparseFeatureVector::from_counts(counts)
}

/// Number of training documents containing each vocabulary term.
pub fn document_frequencies<I, D>(docs: I, vocab: &BowVocab) -> Vec<usize>
where
    I: IntoIterator<Item = D>,
    D: AsRef<[String]>,
{
    let mut df = vec![0usize; vocab.len()];
    for doc in docs {
        for i in bow_features(doc.as_ref(), vocab).indices() {
            df[*i as usize] += 1;
        }
    }
    df
}

/// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
pub fn idf(df: usize, n_docs: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Term counts weighted by [`idf`], scaled to unit L2 norm.
pub fn tfidf_features<S: AsRef<str>>(
    tokens: &[S],
    vocab: &BowVocab,
    doc_freqs: &[usize],
    n_docs: usize,
) -> Result<SparseFeatureVector> {
    if doc_freqs.len() != vocab.len() {
        return Err(Error::shape(format!(
            "{} document frequencies for {} terms",
            doc_freqs.len(),
            vocab.len()
        )));
    }
    let mut v = bow_features(tokens, vocab);
    for (i, x) in v.indices.iter().zip(v.values.iter_mut()) {
        *x *= idf(doc_freqs[*i as usize], n_docs);
    }
    let norm = v.l2_norm();
    if norm > 0.0 {
        v.values.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}
