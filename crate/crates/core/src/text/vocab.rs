use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Index shared by padding and out-of-vocabulary words.
pub const PAD_INDEX: u32 = 0;
pub const DEFAULT_MAX_VOCAB: usize = 20_000;

/// Word-to-index map. Index 0 is reserved; words occupy `1..=len()` densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

/// A padded index sequence with its sentiment label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub indices: Vec<u32>,
    pub label: u8,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent words. Equal counts are ordered
    /// lexicographically, and indices follow that order starting at 1.
    pub fn build<I, D>(docs: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[String]>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            for tok in doc.as_ref() {
                *counts.entry(tok.clone()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size);
        Self::from_words(ranked.into_iter().map(|(w, _)| w).collect())
    }

    fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32 + 1))
            .collect();
        Self { words, index }
    }

    /// Number of words, excluding the reserved index.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows needed in an embedding matrix: `len() + 1`.
    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn lookup(&self, word: &str) -> u32 {
        self.get(word).unwrap_or(PAD_INDEX)
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        if index == PAD_INDEX {
            return None;
        }
        self.words.get(index as usize - 1).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32 + 1))
    }

    /// Looks up every token (unknown → 0), keeps the first `max_len` and pads
    /// with 0 to exactly `max_len`.
    pub fn encode_pad<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Vec<u32> {
        let mut out: Vec<u32> = tokens
            .iter()
            .take(max_len)
            .map(|t| self.lookup(t.as_ref()))
            .collect();
        out.resize(max_len, PAD_INDEX);
        out
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], label: u8, max_len: usize) -> EncodedExample {
        EncodedExample {
            indices: self.encode_pad(tokens, max_len),
            label,
        }
    }

    /// JSON object `word → index`, keys sorted.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, u32> = self.iter().collect();
        serde_json::to_string(&map).expect("string map always serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let map: BTreeMap<String, u32> = serde_json::from_str(json)?;
        let mut words = vec![None; map.len()];
        for (word, idx) in map {
            let slot = (idx as usize)
                .checked_sub(1)
                .and_then(|i| words.get_mut(i))
                .ok_or_else(|| {
                    Error::Invalid(format!("vocabulary index {idx} for {word:?} is out of range"))
                })?;
            if slot.is_some() {
                return Err(Error::Invalid(format!("vocabulary index {idx} used twice")));
            }
            *slot = Some(word);
        }
        let words = words
            .into_iter()
            .map(|w| w.expect("dense indices checked above"))
            .collect();
        Ok(Self::from_words(words))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn docs(texts: &[&str]) -> Vec<Vec<String>> {
        texts.iter().map(|t| tokenize(t)).collect()
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = Vocabulary::build(docs(&["a a b", "a c"]), 2);
        assert_eq!(v.get("a"), Some(1));
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.get("c"), None);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn all_words_when_under_limit() {
        let v = Vocabulary::build(docs(&["x y z", "y"]), 100);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get("y"), Some(1));
    }

    #[test]
    fn truncates_to_max_size() {
        let doc: Vec<String> = (0..30_000).map(|i| format!("w{i}")).collect();
        let v = Vocabulary::build([doc], DEFAULT_MAX_VOCAB);
        assert_eq!(v.len(), 20_000);
        assert_eq!(v.rows(), 20_001);
    }

    #[test]
    fn empty_corpus_is_valid() {
        let v = Vocabulary::build(Vec::<Vec<String>>::new(), 10);
        assert!(v.is_empty());
        assert_eq!(v.rows(), 1);
    }

    #[test]
    fn encode_pads_and_truncates() {
        let v = Vocabulary::build(docs(&["good phone"]), 10);
        let enc = v.encode_pad(&["good", "phone"], 5);
        assert_eq!(enc, vec![v.lookup("good"), v.lookup("phone"), 0, 0, 0]);
        assert_eq!(v.encode_pad(&["nope", "never"], 4), vec![0; 4]);
        let long: Vec<String> = (0..150).map(|_| "good".to_string()).collect();
        let enc = v.encode_pad(&long, 100);
        assert_eq!(enc.len(), 100);
        assert!(enc.iter().all(|&i| i == v.lookup("good")));
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::build(docs(&["the cat sat on the mat", "a dog"]), 100);
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.content_hash(), back.content_hash());
    }

    #[test]
    fn json_rejects_zero_and_gaps() {
        assert!(Vocabulary::from_json(r#"{"a":0}"#).is_err());
        assert!(Vocabulary::from_json(r#"{"a":1,"b":3}"#).is_err());
        assert!(Vocabulary::from_json(r#"{"a":1,"b":1}"#).is_err());
    }
}
