//! Two-stage retrieval over an [`ImpactIndex`].
//!
//! 1. Candidate retrieval: a disjunctive ("should") document-at-a-time merge of the
//!    query terms' posting lists, accumulating each document's score and the number
//!    of distinct query terms it matches.
//! 2. Threshold filtering: keep documents that match at least
//!    `max(1, ceil(threshold * m))` of the `m` query terms.
//!
//! Survivors are ranked by score with a bounded heap. Query-side top-k term
//! selection happens while planning the query.

pub mod bm25;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Duration;

use thiserror::Error;
use web_time::Instant;

use crate::index::ImpactIndex;
use crate::sparse::SparseVector;

pub use bm25::{
    bm25_doc_impact, bm25_query_weight, vectorize_doc_bm25, vectorize_query_bm25, Bm25Params,
    CollectionStats,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("no query terms survive vocabulary mapping and pruning")]
    EmptyQuery,
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub top_n: usize,
    /// Query terms kept by weight; 0 keeps all.
    pub query_k: usize,
    /// Fraction of query terms a document must match; 0 is the plain disjunction.
    pub threshold: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            top_n: 10,
            query_k: 0,
            threshold: 0.0,
        }
    }
}

impl SearchParams {
    pub fn new(top_n: usize, query_k: usize, threshold: f64) -> Result<Self, RetrievalError> {
        let params = Self {
            top_n,
            query_k,
            threshold,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.top_n == 0 {
            return Err(RetrievalError::InvalidParams(
                "top_n must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(RetrievalError::InvalidParams(format!(
                "threshold {} is outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Query-time pruning: keep the `query_k` heaviest terms, or everything when 0.
pub fn select_query_terms(qvec: &SparseVector, query_k: usize) -> SparseVector {
    if query_k == 0 {
        qvec.clone()
    } else {
        qvec.top_k_truncate(query_k)
    }
}

/// `max(1, ceil(threshold * m))`, capped at `m`.
pub fn required_matches(threshold: f64, m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    // absorbs representation error such as 0.7 * 10 = 7.000000000000001
    let raw = (threshold * m as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    terms: SparseVector,
    required_matches: usize,
}

impl QueryPlan {
    pub fn terms(&self) -> &SparseVector {
        &self.terms
    }

    /// Number of distinct query terms.
    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn required_matches(&self) -> usize {
        self.required_matches
    }
}

/// Drops terms outside the index vocabulary, applies query-term selection and
/// derives the match requirement.
pub fn plan_query(
    qvec: &SparseVector,
    params: &SearchParams,
    index: &ImpactIndex,
) -> Result<QueryPlan, RetrievalError> {
    params.validate()?;
    let known = qvec.retain(|t, _| index.vocab().contains(t));
    let terms = select_query_terms(&known, params.query_k);
    if terms.is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let required_matches = required_matches(params.threshold, terms.len());
    Ok(QueryPlan {
        terms,
        required_matches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub doc: u32,
    pub score: f64,
    pub matched_terms: u32,
}

/// Accumulator table, ascending by document ordinal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, doc: u32) -> Option<&Candidate> {
        self.candidates
            .binary_search_by_key(&doc, |c| c.doc)
            .ok()
            .map(|i| &self.candidates[i])
    }

    pub fn docs(&self) -> impl Iterator<Item = u32> + '_ {
        self.candidates.iter().map(|c| c.doc)
    }
}

/// Disjunctive document-at-a-time merge. Per document, contributions are summed in
/// ascending term order, the same order [`SparseVector::dot`] uses.
pub fn retrieve_candidates(index: &ImpactIndex, plan: &QueryPlan) -> CandidateSet {
    struct Cursor<'a> {
        weight: f64,
        list: &'a [crate::index::Posting],
        pos: usize,
    }
    let mut cursors: Vec<Cursor> = plan
        .terms
        .entries()
        .iter()
        .map(|&(term, weight)| Cursor {
            weight,
            list: index.postings(term),
            pos: 0,
        })
        .filter(|c| !c.list.is_empty())
        .collect();

    let mut out = Vec::new();
    while let Some(doc) = cursors.iter().map(|c| c.list[c.pos].doc).min() {
        let mut score = 0.0;
        let mut matched = 0u32;
        for c in cursors.iter_mut() {
            let p = c.list[c.pos];
            if p.doc == doc {
                score += c.weight * f64::from(p.impact);
                matched += 1;
                c.pos += 1;
            }
        }
        out.push(Candidate {
            doc,
            score,
            matched_terms: matched,
        });
        cursors.retain(|c| c.pos < c.list.len());
    }
    CandidateSet { candidates: out }
}

/// Keeps candidates matching at least `plan.required_matches()` terms.
pub fn threshold_filter(mut candidates: CandidateSet, plan: &QueryPlan) -> CandidateSet {
    let required = plan.required_matches as u32;
    candidates
        .candidates
        .retain(|c| c.matched_terms >= required);
    candidates
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub doc: u32,
    pub external_id: String,
    pub score: f64,
    pub matched_terms: u32,
}

/// Score descending, then ordinal ascending.
fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc))
}

struct Ranked(Candidate);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Best `top_n` candidates through a bounded heap whose top is the worst kept entry.
pub fn rank_top_n(
    index: &ImpactIndex,
    candidates: &CandidateSet,
    top_n: usize,
) -> Vec<SearchResult> {
    assert!(top_n >= 1, "top_n must be at least 1");
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(top_n + 1);
    for &c in &candidates.candidates {
        if heap.len() < top_n {
            heap.push(Ranked(c));
        } else if let Some(worst) = heap.peek() {
            if rank_order(&c, &worst.0) == Ordering::Less {
                heap.pop();
                heap.push(Ranked(c));
            }
        }
    }
    heap.into_sorted_vec()
        .into_iter()
        .map(|Ranked(c)| SearchResult {
            doc: c.doc,
            external_id: index.doc(c.doc).external_id.clone(),
            score: c.score,
            matched_terms: c.matched_terms,
        })
        .collect()
}

/// Results plus the instrumentation the evaluation harness records.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub results: Vec<SearchResult>,
    pub query_terms: usize,
    pub required_matches: usize,
    pub candidates_pre_filter: usize,
    pub candidates_post_filter: usize,
    pub elapsed: Duration,
}

pub fn search(
    index: &ImpactIndex,
    qvec: &SparseVector,
    params: &SearchParams,
) -> Result<SearchOutcome, RetrievalError> {
    let start = Instant::now();
    let plan = plan_query(qvec, params, index)?;
    let candidates = retrieve_candidates(index, &plan);
    let pre = candidates.len();
    let filtered = threshold_filter(candidates, &plan);
    let post = filtered.len();
    let results = rank_top_n(index, &filtered, params.top_n);
    Ok(SearchOutcome {
        results,
        query_terms: plan.m(),
        required_matches: plan.required_matches,
        candidates_pre_filter: pre,
        candidates_post_filter: post,
        elapsed: start.elapsed(),
    })
}
