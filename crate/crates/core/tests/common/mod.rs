//! Independent reference implementations and random instance generators shared
//! by the integration tests. Nothing here calls into the code under test except
//! to build inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spix::index::{DocInput, Vocabulary};
use spix::{SparseVector, TermId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain term-weight pairs, ascending by term, no duplicates.
pub type Pairs = Vec<(u32, f64)>;

#[derive(Debug, Clone, Copy)]
pub enum WeightKind {
    /// Multiples of 1/16 in [1/16, 4]; sums are exact, so ties are common and real.
    Dyadic,
    /// Arbitrary values that are exactly representable as f32.
    F32,
}

pub fn random_weight(rng: &mut ChaCha8Rng, kind: WeightKind) -> f64 {
    match kind {
        WeightKind::Dyadic => f64::from(rng.random_range(1u32..=64)) / 16.0,
        WeightKind::F32 => f64::from(rng.random_range(1e-3f32..10.0f32)),
    }
}

pub fn random_pairs(rng: &mut ChaCha8Rng, vocab: u32, max_terms: usize, kind: WeightKind) -> Pairs {
    let len = rng.random_range(0..=max_terms.min(vocab as usize));
    let mut terms = BTreeSet::new();
    while terms.len() < len {
        terms.insert(rng.random_range(0..vocab));
    }
    terms
        .into_iter()
        .map(|t| (t, random_weight(rng, kind)))
        .collect()
}

pub fn to_vector(pairs: &Pairs) -> SparseVector {
    SparseVector::from_pairs(pairs.iter().map(|&(t, w)| (TermId(t), w))).unwrap()
}

pub struct Instance {
    pub vocab_size: u32,
    pub docs: Vec<Pairs>,
    pub queries: Vec<Pairs>,
}

impl Instance {
    pub fn random(
        rng: &mut ChaCha8Rng,
        max_docs: usize,
        max_vocab: u32,
        max_doc_terms: usize,
        queries: usize,
        max_query_terms: usize,
    ) -> Self {
        let kind = if rng.random_bool(0.5) {
            WeightKind::Dyadic
        } else {
            WeightKind::F32
        };
        let vocab_size = rng.random_range(1..=max_vocab);
        let n = rng.random_range(1..=max_docs);
        let docs = (0..n)
            .map(|_| random_pairs(rng, vocab_size, max_doc_terms, kind))
            .collect();
        let queries = (0..queries)
            .map(|_| {
                let mut q = random_pairs(rng, vocab_size, max_query_terms, kind);
                if q.is_empty() {
                    q.push((rng.random_range(0..vocab_size), 1.0));
                }
                q
            })
            .collect();
        Self {
            vocab_size,
            docs,
            queries,
        }
    }

    pub fn vocab(&self) -> Vocabulary {
        Vocabulary::numeric(self.vocab_size)
    }

    pub fn doc_inputs(&self) -> Vec<DocInput> {
        self.docs
            .iter()
            .enumerate()
            .map(|(i, d)| DocInput::new(format!("doc{i}"), to_vector(d), d.len() as u32))
            .collect()
    }

    pub fn max_doc_terms(&self) -> usize {
        self.docs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Linear-scan lookup; deliberately naive.
pub fn weight_of(pairs: &Pairs, term: u32) -> Option<f64> {
    pairs.iter().find(|p| p.0 == term).map(|p| p.1)
}

/// Score and matched-term count of every document sharing at least one term with
/// the query, by direct evaluation of the dot product.
pub fn exhaustive_scores(docs: &[Pairs], query: &Pairs) -> Vec<(usize, f64, usize)> {
    let mut out = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let mut score = 0.0;
        let mut matched = 0;
        for &(t, qw) in query {
            if let Some(dw) = weight_of(d, t) {
                score += qw * dw;
                matched += 1;
            }
        }
        if matched > 0 {
            out.push((i, score, matched));
        }
    }
    out
}

/// Full sort by score descending then index ascending, truncated to `n`.
pub fn sort_and_truncate(
    mut scored: Vec<(usize, f64, usize)>,
    n: usize,
) -> Vec<(usize, f64, usize)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

/// Keeps the `k` heaviest entries, ties by smaller term.
pub fn naive_top_k(pairs: &Pairs, k: usize) -> Pairs {
    let mut v = pairs.clone();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v.sort_by_key(|p| p.0);
    v
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// (1 / (|Q| N)) * sum over query/document pairs of the size of their support
/// intersection, with the count kept as an integer.
pub fn pair_intersection_flops(docs: &[Pairs], queries: &[Pairs]) -> (u64, f64) {
    let mut count = 0u64;
    for q in queries {
        for d in docs {
            count += q.iter().filter(|(t, _)| weight_of(d, *t).is_some()).count() as u64;
        }
    }
    let value = count as f64 / (queries.len() as f64 * docs.len() as f64);
    (count, value)
}

/// Textbook BM25 over raw token lists: sum over distinct query tokens found in
/// the document of idf * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl)).
pub struct ClassicBm25<'a> {
    docs: &'a [Vec<String>],
    df: BTreeMap<&'a str, usize>,
    avgdl: f64,
    k1: f64,
    b: f64,
}

impl<'a> ClassicBm25<'a> {
    pub fn new(docs: &'a [Vec<String>], k1: f64, b: f64) -> Self {
        let mut df = BTreeMap::new();
        for d in docs {
            let distinct: BTreeSet<&str> = d.iter().map(String::as_str).collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let total: usize = docs.iter().map(Vec::len).sum();
        Self {
            docs,
            df,
            avgdl: total as f64 / docs.len() as f64,
            k1,
            b,
        }
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        let n = self.docs.len() as f64;
        self.df
            .get(term)
            .map(|&df| (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln())
    }

    pub fn score(&self, query: &[String], doc: usize) -> f64 {
        let d = &self.docs[doc];
        let distinct: BTreeSet<&str> = query.iter().map(String::as_str).collect();
        let mut s = 0.0;
        for t in distinct {
            let tf = d.iter().filter(|x| x.as_str() == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = self.idf(t).expect("term occurs in a document");
            let norm = self.k1 * (1.0 - self.b + self.b * d.len() as f64 / self.avgdl);
            s += idf * tf * (self.k1 + 1.0) / (tf + norm);
        }
        s
    }
}

/// Tokens drawn from a small alphabet so that repeats and shared terms are common.
pub fn random_tokens(rng: &mut ChaCha8Rng, alphabet: usize, min: usize, max: usize) -> Vec<String> {
    let len = rng.random_range(min..=max);
    (0..len)
        .map(|_| format!("w{}", rng.random_range(0..alphabet)))
        .collect()
}
