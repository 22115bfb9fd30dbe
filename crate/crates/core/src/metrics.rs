//! Effectiveness (MRR@k, SSS@k) and efficiency (FLOPS estimate, latency) metrics.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::index::ImpactIndex;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no judged queries")]
    NoJudgedQueries,
    #[error("no embedding for document {0:?}")]
    MissingEmbedding(String),
    #[error("zero vector has no cosine similarity")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding for {0:?} is invalid: {1}")]
    BadEmbedding(String, &'static str),
    #[error("empty query set")]
    EmptyQuerySet,
    #[error("no latency samples")]
    EmptySamples,
    #[error("k must be at least 1")]
    ZeroK,
}

/// Relevant documents per query, deduplicated, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Judgments {
    relevant: BTreeMap<String, Vec<String>>,
}

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>) {
        let docs = self.relevant.entry(query_id.into()).or_default();
        let doc_id = doc_id.into();
        if !docs.contains(&doc_id) {
            docs.push(doc_id);
        }
    }

    pub fn get(&self, query_id: &str) -> Option<&[String]> {
        self.relevant.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.relevant
            .iter()
            .map(|(q, d)| (q.as_str(), d.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }
}

impl<Q: Into<String>, D: Into<String>> FromIterator<(Q, D)> for Judgments {
    fn from_iter<I: IntoIterator<Item = (Q, D)>>(iter: I) -> Self {
        let mut j = Judgments::new();
        for (q, d) in iter {
            j.add(q, d);
        }
        j
    }
}

/// Dense document embeddings of one fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        doc_id: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<(), MetricsError> {
        let doc_id = doc_id.into();
        if vector.len() != self.dim {
            return Err(MetricsError::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::BadEmbedding(doc_id, "non-finite component"));
        }
        if vector.iter().all(|&x| x == 0.0) {
            return Err(MetricsError::BadEmbedding(doc_id, "zero vector"));
        }
        self.vectors.insert(doc_id, vector);
        Ok(())
    }

    pub fn get(&self, doc_id: &str) -> Option<&[f64]> {
        self.vectors.get(doc_id).map(Vec::as_slice)
    }

    fn require(&self, doc_id: &str) -> Result<&[f64], MetricsError> {
        self.get(doc_id)
            .ok_or_else(|| MetricsError::MissingEmbedding(doc_id.to_owned()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryRun {
    /// Ranked `(external_id, score)`, best first.
    pub hits: Vec<(String, f64)>,
    pub latency_secs: f64,
    pub candidates_pre_filter: usize,
    pub candidates_post_filter: usize,
}

/// Per-query ranked lists and measurements of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunResults {
    pub queries: BTreeMap<String, QueryRun>,
}

impl RunResults {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, run: QueryRun) {
        self.queries.insert(query_id.into(), run);
    }

    pub fn hits(&self, query_id: &str) -> &[(String, f64)] {
        self.queries
            .get(query_id)
            .map(|r| r.hits.as_slice())
            .unwrap_or(&[])
    }
}

/// Reciprocal rank of the first relevant hit within the top `k`, averaged over
/// judged queries. Judged queries missing from the run count as 0.
pub fn mrr_at_k(run: &RunResults, judgments: &Judgments, k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if judgments.is_empty() {
        return Err(MetricsError::NoJudgedQueries);
    }
    let total: f64 = judgments
        .iter()
        .map(|(qid, relevant)| {
            run.hits(qid)
                .iter()
                .take(k)
                .position(|(doc, _)| relevant.contains(doc))
                .map_or(0.0, |rank| 1.0 / (rank + 1) as f64)
        })
        .sum();
    Ok(total / judgments.len() as f64)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// How one retrieved document's similarities to several ground-truth documents combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SssAggregation {
    #[default]
    Max,
    Mean,
}

/// Semantic similarity of the top `k` hits to the ground truth, averaged per query
/// over the hits present and then over judged queries. Queries with no hits count as 0.
pub fn sss_at_k(
    run: &RunResults,
    judgments: &Judgments,
    store: &EmbeddingStore,
    k: usize,
    aggregation: SssAggregation,
) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if judgments.is_empty() {
        return Err(MetricsError::NoJudgedQueries);
    }
    let mut total = 0.0;
    for (qid, truth) in judgments.iter() {
        let hits: Vec<&str> = run
            .hits(qid)
            .iter()
            .take(k)
            .map(|(d, _)| d.as_str())
            .collect();
        if hits.is_empty() {
            continue;
        }
        let truth_vecs = truth
            .iter()
            .map(|g| store.require(g))
            .collect::<Result<Vec<_>, _>>()?;
        let mut per_query = 0.0;
        for doc in &hits {
            let emb = store.require(doc)?;
            let (mut best, mut sum) = (f64::NEG_INFINITY, 0.0);
            for g in &truth_vecs {
                let s = cosine(emb, g)?;
                best = best.max(s);
                sum += s;
            }
            per_query += match aggregation {
                SssAggregation::Max => best,
                SssAggregation::Mean => sum / truth_vecs.len() as f64,
            };
        }
        total += per_query / hits.len() as f64;
    }
    Ok(total / judgments.len() as f64)
}

/// Expected multiplications per (query, document) pair: `sum_j p_Q(j) p_D(j)` over
/// activation supports. Computed as an exact integer count divided once.
pub fn flops_estimate(index: &ImpactIndex, queries: &[SparseVector]) -> Result<f64, MetricsError> {
    if queries.is_empty() {
        return Err(MetricsError::EmptyQuerySet);
    }
    if index.doc_count() == 0 {
        return Ok(0.0);
    }
    let mut query_df: BTreeMap<_, u64> = BTreeMap::new();
    for q in queries {
        for t in q.terms() {
            *query_df.entry(t).or_default() += 1;
        }
    }
    let collisions: u128 = query_df
        .into_iter()
        .map(|(t, qdf)| u128::from(qdf) * index.df(t) as u128)
        .sum();
    Ok(collisions as f64 / (queries.len() as f64 * index.doc_count() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank percentile of a sorted slice.
fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50: nearest_rank(&sorted, 50.0),
        p95: nearest_rank(&sorted, 95.0),
        max: sorted[sorted.len() - 1],
    })
}

/// Distinct query ids in the run that have no judgments.
pub fn unjudged_queries<'a>(run: &'a RunResults, judgments: &Judgments) -> Vec<&'a str> {
    let judged: HashSet<&str> = judgments.iter().map(|(q, _)| q).collect();
    run.queries
        .keys()
        .map(String::as_str)
        .filter(|q| !judged.contains(q))
        .collect()
}
