use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::tokenize;

/// Train/validation/test percentages.
pub const SPLIT_PERCENT: (usize, usize, usize) = (64, 16, 20);

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

impl Review {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: u8) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn slot(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Stratified 64/16/20 split.
///
/// Each class is shuffled, then the classes are interleaved by relative rank so
/// every prefix of the combined order has (nearly) the global class ratio.
/// Cutting that order at `round(0.64 n)` and `round(0.16 n)` gives exact split
/// totals with per-class counts within one of proportional.
pub fn split_stratified(labels: &[u8], rng: &mut Rng) -> Splits {
    let n = labels.len();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[(y != 0) as usize].push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (class, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        let size = members.len() as f64;
        for (rank, &idx) in members.iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / size, class, idx));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let (p_train, p_val, _) = SPLIT_PERCENT;
    let n_train = ((n * p_train + 50) / 100).min(n);
    let n_val = ((n * p_val + 50) / 100).min(n - n_train);
    let order: Vec<usize> = keyed.into_iter().map(|(_, _, idx)| idx).collect();
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

/// Labeled reviews from one domain together with their split assignment.
///
/// Split contents are only reachable through [`DomainDataset::split`], which
/// counts accesses so an experiment can prove it never looked at a split.
#[derive(Debug)]
pub struct DomainDataset {
    domain: String,
    reviews: Vec<Review>,
    splits: Splits,
    reads: [AtomicUsize; 3],
}

impl DomainDataset {
    pub fn new(domain: impl Into<String>, reviews: Vec<Review>, splits: Splits) -> Result<Self> {
        let mut seen = HashSet::new();
        for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
            if i >= reviews.len() {
                return Err(Error::Invalid(format!(
                    "split index {i} out of range for {} reviews",
                    reviews.len()
                )));
            }
            if !seen.insert(i) {
                return Err(Error::Invalid(format!("review {i} assigned to two splits")));
            }
        }
        if let Some(bad) = reviews.iter().find(|r| r.label > 1) {
            return Err(Error::Invalid(format!(
                "review {} has non-binary label {}",
                bad.id, bad.label
            )));
        }
        Ok(Self {
            domain: domain.into(),
            reviews,
            splits,
            reads: Default::default(),
        })
    }

    /// Shuffles with `seed` and splits 64/16/20 with class stratification.
    pub fn with_stratified_split(domain: impl Into<String>, reviews: Vec<Review>, seed: u64) -> Result<Self> {
        let labels: Vec<u8> = reviews.iter().map(|r| r.label).collect();
        let splits = split_stratified(&labels, &mut Rng::new(seed));
        Self::new(domain, reviews, splits)
    }

    pub fn load(path: impl AsRef<Path>, domain: &str, seed: u64) -> Result<Self> {
        let reviews = load_jsonl(path, Some(domain))?;
        Self::with_stratified_split(domain, reviews, seed)
    }

    /// Uses three files as the train, validation and test splits verbatim.
    pub fn load_presplit(
        train: impl AsRef<Path>,
        val: impl AsRef<Path>,
        test: impl AsRef<Path>,
        domain: &str,
    ) -> Result<Self> {
        let mut reviews = Vec::new();
        let mut splits = Splits::default();
        for (path, slot) in [
            (train.as_ref(), &mut splits.train),
            (val.as_ref(), &mut splits.val),
            (test.as_ref(), &mut splits.test),
        ] {
            let part = load_jsonl(path, Some(domain))?;
            slot.extend(reviews.len()..reviews.len() + part.len());
            reviews.extend(part);
        }
        Self::new(domain, reviews, splits)
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// Document ids of every review. Does not count as a split read.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.reviews.iter().map(|r| r.id.as_str())
    }

    /// Reviews of one split, in split order. Each call is recorded.
    pub fn split(&self, which: Split) -> Vec<&Review> {
        self.reads[which.slot()].fetch_add(1, Ordering::Relaxed);
        self.splits.get(which).iter().map(|&i| &self.reviews[i]).collect()
    }

    /// How many times [`DomainDataset::split`] was called for `which`.
    pub fn reads(&self, which: Split) -> usize {
        self.reads[which.slot()].load(Ordering::Relaxed)
    }

    /// All reviews in file order. Counts as a read of every split.
    pub fn all_reviews(&self) -> &[Review] {
        for r in &self.reads {
            r.fetch_add(1, Ordering::Relaxed);
        }
        &self.reviews
    }
}

#[derive(Deserialize)]
struct Record {
    text: String,
    label: serde_json::Value,
    domain: String,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    text: &'a str,
    label: u8,
    domain: &'a str,
}

/// Reads a JSON-lines corpus with `text`, `label` (0 or 1), `domain` and an
/// optional `id` per line. Missing ids default to `<domain>:<line>`.
pub fn load_jsonl(path: impl AsRef<Path>, expected_domain: Option<&str>) -> Result<Vec<Review>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reviews = Vec::new();
    let mut mismatched = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let label = match rec.label.as_u64() {
            Some(l @ (0 | 1)) => l as u8,
            _ => {
                return Err(Error::Validation {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("label must be 0 or 1, got {}", rec.label),
                })
            }
        };
        if expected_domain.is_some_and(|d| d != rec.domain) {
            mismatched += 1;
        }
        let id = rec.id.unwrap_or_else(|| format!("{}:{line_no}", rec.domain));
        reviews.push(Review::new(id, rec.text, label));
    }
    if mismatched > 0 {
        log::warn!(
            "{}: {mismatched} records have a domain other than {:?}",
            path.display(),
            expected_domain.unwrap_or_default()
        );
    }
    Ok(reviews)
}

pub fn write_jsonl<'a>(
    path: impl AsRef<Path>,
    domain: &str,
    reviews: impl IntoIterator<Item = &'a Review>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in reviews {
        let rec = RecordOut {
            id: &r.id,
            text: &r.text,
            label: r.label,
            domain,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn balanced_labels(n: usize) -> Vec<u8> {
        (0..n).map(|i| (i % 2) as u8).collect()
    }

    fn class_count(labels: &[u8], idx: &[usize], class: u8) -> usize {
        idx.iter().filter(|&&i| labels[i] == class).count()
    }

    #[test]
    fn split_sizes_64_16_20() {
        for (n, expect) in [(2000, (1280, 320, 400)), (20_000, (12_800, 3200, 4000))] {
            let labels = balanced_labels(n);
            let s = split_stratified(&labels, &mut Rng::new(1));
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), expect);
            assert_eq!(class_count(&labels, &s.train, 1), expect.0 / 2);
        }
    }

    #[test]
    fn tiny_split_is_stratified() {
        let labels = balanced_labels(10);
        for seed in 0..20 {
            let s = split_stratified(&labels, &mut Rng::new(seed));
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
            assert!(class_count(&labels, &s.train, 0) >= 1);
            assert!(class_count(&labels, &s.train, 1) >= 1);
            assert_eq!(class_count(&labels, &s.train, 1), 3);
        }
    }

    #[test]
    fn split_reads_are_counted() {
        let reviews: Vec<Review> = (0..10)
            .map(|i| Review::new(format!("r{i}"), "fine", (i % 2) as u8))
            .collect();
        let ds = DomainDataset::with_stratified_split("d", reviews, 3).unwrap();
        assert_eq!(ds.reads(Split::Train), 0);
        let _ = ds.split(Split::Train);
        let _ = ds.split(Split::Train);
        assert_eq!(ds.reads(Split::Train), 2);
        assert_eq!(ds.reads(Split::Val), 0);
        let _ = ds.ids().count();
        assert_eq!(ds.reads(Split::Test), 0);
    }

    #[test]
    fn overlapping_splits_rejected() {
        let reviews = vec![Review::new("a", "x", 0), Review::new("b", "y", 1)];
        let splits = Splits {
            train: vec![0, 1],
            val: vec![1],
            test: vec![],
        };
        assert!(DomainDataset::new("d", reviews, splits).is_err());
    }

    #[test]
    fn jsonl_label_validation_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"text":"good","label":1,"domain":"books"}}"#).unwrap();
        writeln!(f, r#"{{"text":"meh","label":2,"domain":"books"}}"#).unwrap();
        match load_jsonl(f.path(), Some("books")) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let reviews = vec![
            Review::new("x1", "Great \"book\"", 1),
            Review::new("x2", "dull", 0),
        ];
        write_jsonl(&path, "books", &reviews).unwrap();
        let back = load_jsonl(&path, Some("books")).unwrap();
        assert_eq!(back, reviews);
    }

    #[test]
    fn default_ids_use_domain_and_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"text":"good","label":1,"domain":"kitchen"}}"#).unwrap();
        let r = load_jsonl(f.path(), None).unwrap();
        assert_eq!(r[0].id, "kitchen:1");
    }
}
