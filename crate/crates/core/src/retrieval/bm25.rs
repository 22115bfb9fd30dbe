//! BM25 expressed as impacts, so lexical scoring runs through the same
//! dot-product path as learned sparse vectors.
//!
//! The document side carries the saturated, length-normalized term frequency and
//! the query side carries the idf. Their dot product is the classic BM25 score.

use std::collections::BTreeMap;

use crate::index::{ImpactIndex, Vocabulary};
use crate::sparse::{SparseVector, TermId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// `tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl))`
pub fn bm25_doc_impact(tf: u32, doc_len: u32, avgdl: f64, k1: f64, b: f64) -> f64 {
    let tf = f64::from(tf);
    let norm = 1.0 - b + b * f64::from(doc_len) / avgdl;
    tf * (k1 + 1.0) / (tf + k1 * norm)
}

/// Robertson idf with the +1 inside the log, positive for every df.
pub fn bm25_query_weight(df: u64, doc_count: u64) -> f64 {
    let (df, n) = (df as f64, doc_count as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Collection statistics needed to vectorize text.
#[derive(Debug, Clone, Default)]
pub struct CollectionStats {
    pub doc_count: u64,
    pub avg_doc_len: f64,
    pub df: BTreeMap<String, u64>,
}

impl CollectionStats {
    pub fn from_documents<'a, D, T>(docs: D) -> Self
    where
        D: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a str>,
    {
        let mut stats = CollectionStats::default();
        let mut total_len = 0u64;
        for doc in docs {
            let tokens: Vec<&str> = doc.into_iter().collect();
            total_len += tokens.len() as u64;
            stats.doc_count += 1;
            let mut distinct: Vec<&str> = tokens;
            distinct.sort_unstable();
            distinct.dedup();
            for t in distinct {
                *stats.df.entry(t.to_owned()).or_default() += 1;
            }
        }
        if stats.doc_count > 0 {
            stats.avg_doc_len = total_len as f64 / stats.doc_count as f64;
        }
        stats
    }

    /// Statistics as seen by an index built from BM25 document vectors.
    pub fn from_index(index: &ImpactIndex) -> Self {
        let df = index
            .vocab()
            .terms()
            .iter()
            .enumerate()
            .map(|(i, term)| (term.clone(), index.df(TermId(i as u32)) as u64))
            .filter(|&(_, df)| df > 0)
            .collect();
        Self {
            doc_count: index.doc_count() as u64,
            avg_doc_len: index.avg_raw_length(),
            df,
        }
    }
}

fn term_frequencies<'a>(tokens: &[&'a str]) -> BTreeMap<&'a str, u32> {
    let mut tf = BTreeMap::new();
    for &t in tokens {
        *tf.entry(t).or_insert(0u32) += 1;
    }
    tf
}

/// Document-side vector: one BM25 impact per distinct token. New tokens are interned.
pub fn vectorize_doc_bm25(
    tokens: &[&str],
    stats: &CollectionStats,
    params: Bm25Params,
    vocab: &mut Vocabulary,
) -> SparseVector {
    let doc_len = tokens.len() as u32;
    let pairs: Vec<(TermId, f64)> = term_frequencies(tokens)
        .into_iter()
        .map(|(token, tf)| {
            let impact = bm25_doc_impact(tf, doc_len, stats.avg_doc_len, params.k1, params.b);
            (vocab.intern(token), impact)
        })
        .collect();
    SparseVector::from_pairs(pairs).expect("BM25 impacts are positive and finite")
}

/// Query-side vector: one idf weight per distinct token present in the vocabulary
/// with non-zero df. Returns the vector and the tokens that were dropped.
pub fn vectorize_query_bm25<'a>(
    tokens: &[&'a str],
    stats: &CollectionStats,
    vocab: &Vocabulary,
) -> (SparseVector, Vec<&'a str>) {
    let mut dropped = Vec::new();
    let mut pairs = Vec::new();
    for (token, _) in term_frequencies(tokens) {
        match (vocab.get(token), stats.df.get(token)) {
            (Some(id), Some(&df)) if df > 0 => {
                pairs.push((id, bm25_query_weight(df, stats.doc_count)));
            }
            _ => dropped.push(token),
        }
    }
    let vector = SparseVector::from_pairs(pairs).expect("idf weights are positive and finite");
    (vector, dropped)
}
