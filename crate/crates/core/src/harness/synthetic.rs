use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::text::{DomainDataset, Review};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityLexicon {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDomain {
    pub name: String,
    pub polarity: PolarityLexicon,
    pub noise: Vec<String>,
}

/// Recipe for a labeled multi-domain corpus with controllable domain shift.
///
/// Every sentence carries a few polarity words for its label, drawn from the
/// shared lexicon or, with probability `mix_ratio`, from its domain's own
/// lexicon. The other positions are domain-specific neutral words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub shared: PolarityLexicon,
    pub domains: Vec<SyntheticDomain>,
    pub min_len: usize,
    pub max_len: usize,
    pub min_polarity_words: usize,
    pub max_polarity_words: usize,
    pub mix_ratio: f64,
    pub size_per_domain: usize,
    pub seed: u64,
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl SyntheticCorpusSpec {
    /// Generated lexicons: 10 shared and 10 domain-specific words per polarity,
    /// 100 neutral words per domain. Sentences are 8 to 20 tokens with 2 to 4
    /// polarity words.
    pub fn with_domains<S: AsRef<str>>(names: &[S], size_per_domain: usize, mix_ratio: f64, seed: u64) -> Self {
        let domains = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                SyntheticDomain {
                    name: n.to_string(),
                    polarity: PolarityLexicon {
                        positive: words(&format!("{n}pos"), 10),
                        negative: words(&format!("{n}neg"), 10),
                    },
                    noise: words(&format!("{n}noise"), 100),
                }
            })
            .collect();
        Self {
            shared: PolarityLexicon {
                positive: words("sharedpos", 10),
                negative: words("sharedneg", 10),
            },
            domains,
            min_len: 8,
            max_len: 20,
            min_polarity_words: 2,
            max_polarity_words: 4,
            mix_ratio,
            size_per_domain,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.len() < 2 {
            return Err(Error::Invalid("a synthetic corpus needs at least two domains".into()));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::Invalid(format!("mix ratio {} outside [0, 1]", self.mix_ratio)));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Invalid("sentence length range is empty".into()));
        }
        if self.min_polarity_words == 0
            || self.min_polarity_words > self.max_polarity_words
            || self.max_polarity_words > self.min_len
        {
            return Err(Error::Invalid(
                "polarity word count must be in 1..=min_len with min ≤ max".into(),
            ));
        }
        if self.size_per_domain < 2 {
            return Err(Error::Invalid("need at least two sentences per domain".into()));
        }
        let mut owner: HashMap<&str, String> = HashMap::new();
        let mut lists: Vec<(String, &[String])> = vec![
            ("shared positive".into(), &self.shared.positive),
            ("shared negative".into(), &self.shared.negative),
        ];
        for d in &self.domains {
            lists.push((format!("{} positive", d.name), &d.polarity.positive));
            lists.push((format!("{} negative", d.name), &d.polarity.negative));
            lists.push((format!("{} noise", d.name), &d.noise));
        }
        let mut names: Vec<&str> = self.domains.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate domain names".into()));
        }
        for (list_name, list) in &lists {
            if list.is_empty() {
                return Err(Error::Invalid(format!("{list_name} lexicon is empty")));
            }
            for w in list.iter() {
                if let Some(prev) = owner.insert(w.as_str(), list_name.clone()) {
                    return Err(Error::Invalid(format!(
                        "word {w:?} appears in both the {prev} and {list_name} lexicons"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sentences and labels for one domain. Labels alternate, so the classes
/// differ in size by at most one.
fn domain_sentences(spec: &SyntheticCorpusSpec, d: &SyntheticDomain, rng: &mut Rng) -> Vec<(Vec<String>, u8)> {
    (0..spec.size_per_domain)
        .map(|i| {
            let label = ((i + 1) % 2) as u8;
            let len = rng.int_inclusive(spec.min_len, spec.max_len);
            let k = rng.int_inclusive(spec.min_polarity_words, spec.max_polarity_words);
            let mut toks = Vec::with_capacity(len);
            for _ in 0..k {
                let lex = if rng.bernoulli(spec.mix_ratio) {
                    &d.polarity
                } else {
                    &spec.shared
                };
                let list = if label == 1 { &lex.positive } else { &lex.negative };
                toks.push(list[rng.index(list.len())].clone());
            }
            for _ in k..len {
                toks.push(d.noise[rng.index(d.noise.len())].clone());
            }
            rng.shuffle(&mut toks);
            (toks, label)
        })
        .collect()
}

/// One dataset per domain, each split 64/16/20. Review ids are
/// `"{domain}-{index}"`, so domains never share ids.
pub fn generate_synthetic(spec: &SyntheticCorpusSpec) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    spec.domains
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let root = Rng::new(spec.seed).fork(k as u64 + 1);
            let mut text_rng = root.fork(1);
            let reviews = domain_sentences(spec, d, &mut text_rng)
                .into_iter()
                .enumerate()
                .map(|(i, (toks, y))| Review::new(format!("{}-{i}", d.name), toks.join(" "), y))
                .collect();
            DomainDataset::with_stratified_split(&d.name, reviews, root.fork(2).next_u64())
        })
        .collect()
}
