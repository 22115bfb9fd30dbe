//! Seeded synthetic collections standing in for a real query log.
//!
//! Documents belong to latent topics. Each one draws its terms from a Zipf
//! distribution over its topic's slice of the vocabulary, mixed with a Zipf
//! distribution over a shared slice of frequent terms. Each query perturbs one
//! source document: it keeps a weighted sample of that document's terms and adds
//! expansion terms from the same topic. The source document is the query's only
//! judged document. Embeddings are noisy copies of a per-topic center, so
//! documents of the same topic are close in cosine.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Zipf};

use crate::index::{DocInput, Vocabulary};
use crate::metrics::{EmbeddingStore, Judgments};
use crate::sparse::{SparseVector, TermId};

use super::formats::{format_vector_line, Record, RecordBody};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub doc_count: usize,
    pub vocab_size: usize,
    pub query_count: usize,
    pub topics: usize,
    /// Inclusive range of distinct terms per document.
    pub doc_terms: (usize, usize),
    /// Inclusive range of distinct terms per query.
    pub query_terms: (usize, usize),
    /// Fraction of the vocabulary reserved for frequent, topic-neutral terms.
    pub common_fraction: f64,
    /// Probability that a document term comes from its topic slice.
    pub topic_mix: f64,
    /// Inclusive range of the per-query fraction of terms sampled from the source
    /// document; the rest are expansion terms.
    pub query_overlap: (f64, f64),
    pub zipf_exponent: f64,
    pub embedding_dim: usize,
    /// Standard deviation of embedding noise relative to the unit topic center.
    pub embedding_noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            doc_count: 1000,
            vocab_size: 5000,
            query_count: 200,
            topics: 40,
            doc_terms: (12, 40),
            query_terms: (6, 14),
            common_fraction: 0.1,
            topic_mix: 0.7,
            query_overlap: (0.2, 0.9),
            zipf_exponent: 1.1,
            embedding_dim: 32,
            embedding_noise: 0.6,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_owned()));
        if self.doc_count == 0 {
            return bad("doc_count must be at least 1");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.topics == 0 || self.embedding_dim == 0 {
            return bad("topics and embedding_dim must be at least 1");
        }
        let (dmin, dmax) = self.doc_terms;
        let (qmin, qmax) = self.query_terms;
        if dmin == 0 || dmin > dmax || qmin == 0 || qmin > qmax {
            return bad("term-count ranges must be non-empty and start at 1 or more");
        }
        if !(0.0..1.0).contains(&self.common_fraction)
            || !(0.0..=1.0).contains(&self.topic_mix)
            || !(0.0..=1.0).contains(&self.query_overlap.0)
            || !(0.0..=1.0).contains(&self.query_overlap.1)
            || self.query_overlap.0 > self.query_overlap.1
        {
            return bad("fractions must lie in [0, 1]");
        }
        let common = self.common_terms();
        if common == 0 || (self.vocab_size - common) / self.topics == 0 {
            return bad("vocabulary too small for the number of topics");
        }
        if dmax > common.min(self.topic_span()) || qmax > common.min(self.topic_span()) {
            return bad("vocabulary slices are smaller than the requested term counts");
        }
        if self.zipf_exponent <= 0.0 || self.embedding_noise < 0.0 {
            return bad("zipf exponent must be positive and noise non-negative");
        }
        Ok(())
    }

    fn common_terms(&self) -> usize {
        ((self.vocab_size as f64 * self.common_fraction).round() as usize).max(1)
    }

    fn topic_span(&self) -> usize {
        (self.vocab_size - self.common_terms()) / self.topics
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub vocab: Vocabulary,
    pub docs: Vec<DocInput>,
    pub doc_topics: Vec<usize>,
    /// Query records in `term:weight` form.
    pub queries: Vec<Record>,
    /// Ordinal of each query's source document.
    pub query_sources: Vec<usize>,
    pub judgments: Judgments,
    pub embeddings: EmbeddingStore,
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// Positive weight with four decimals.
fn weight(rng: &mut ChaCha8Rng, base: f64, scale: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    round_to(base + scale * e, 4).max(1e-4)
}

struct Sampler {
    common: usize,
    span: usize,
    common_zipf: Zipf<f64>,
    topic_zipf: Zipf<f64>,
}

impl Sampler {
    fn common_term(&self, rng: &mut ChaCha8Rng) -> u32 {
        (self.common_zipf.sample(rng) as usize - 1) as u32
    }

    fn topic_term(&self, rng: &mut ChaCha8Rng, topic: usize) -> u32 {
        (self.common + topic * self.span + self.topic_zipf.sample(rng) as usize - 1) as u32
    }
}

pub fn term_name(id: u32) -> String {
    format!("t{id}")
}

pub fn generate(seed: u64, params: &SyntheticParams) -> Result<SyntheticData, HarnessError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = params.common_terms();
    let span = params.topic_span();
    let sampler = Sampler {
        common,
        span,
        common_zipf: Zipf::new(common as f64, params.zipf_exponent)
            .map_err(|e| HarnessError::Config(e.to_string()))?,
        topic_zipf: Zipf::new(span as f64, params.zipf_exponent)
            .map_err(|e| HarnessError::Config(e.to_string()))?,
    };
    let vocab = Vocabulary::from_terms((0..params.vocab_size as u32).map(term_name))?;

    let doc_id_width = params.doc_count.to_string().len();
    let mut docs = Vec::with_capacity(params.doc_count);
    let mut doc_topics = Vec::with_capacity(params.doc_count);
    for i in 0..params.doc_count {
        let topic = rng.random_range(0..params.topics);
        let len = rng.random_range(params.doc_terms.0..=params.doc_terms.1);
        let mut terms = BTreeSet::new();
        let mut pairs = Vec::with_capacity(len);
        while terms.len() < len {
            let from_topic = rng.random_bool(params.topic_mix);
            let t = if from_topic {
                sampler.topic_term(&mut rng, topic)
            } else {
                sampler.common_term(&mut rng)
            };
            if terms.insert(t) {
                let w = if from_topic {
                    weight(&mut rng, 0.5, 1.0)
                } else {
                    weight(&mut rng, 0.1, 0.3)
                };
                pairs.push((TermId(t), w));
            }
        }
        let vector = SparseVector::from_pairs(pairs).expect("distinct positive weights");
        docs.push(DocInput::new(
            format!("d{i:0doc_id_width$}"),
            vector,
            len as u32,
        ));
        doc_topics.push(topic);
    }

    let query_id_width = params.query_count.max(1).to_string().len();
    let mut queries = Vec::with_capacity(params.query_count);
    let mut query_sources = Vec::with_capacity(params.query_count);
    let mut judgments = Judgments::new();
    for i in 0..params.query_count {
        let source = rng.random_range(0..params.doc_count);
        let doc = &docs[source].vector;
        let len = rng.random_range(params.query_terms.0..=params.query_terms.1);
        let overlap = rng.random_range(params.query_overlap.0..=params.query_overlap.1);
        let from_doc = ((overlap * len as f64).round() as usize).clamp(1, doc.len());

        // weighted sampling without replacement: keep the largest u^(1/w)
        let mut keyed: Vec<(f64, TermId, f64)> = doc
            .entries()
            .iter()
            .map(|&(t, w)| (rng.random::<f64>().powf(1.0 / w), t, w))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut chosen = BTreeSet::new();
        let mut pairs = Vec::with_capacity(len);
        for &(_, t, w) in keyed.iter().take(from_doc) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            chosen.insert(t.0);
            pairs.push((t.0, round_to(w * (0.3 * noise).exp(), 4).max(1e-4)));
        }
        let topic = doc_topics[source];
        let mut attempts = 0;
        while chosen.len() < len && attempts < 50 * len {
            attempts += 1;
            let t = if rng.random_bool(0.7) {
                sampler.topic_term(&mut rng, topic)
            } else {
                sampler.common_term(&mut rng)
            };
            if chosen.insert(t) {
                pairs.push((t, weight(&mut rng, 0.2, 0.5)));
            }
        }
        pairs.sort_unstable_by_key(|p| p.0);
        let qid = format!("q{i:0query_id_width$}");
        judgments.add(qid.clone(), docs[source].external_id.clone());
        queries.push(Record {
            id: qid,
            line: i + 1,
            body: RecordBody::Pairs(pairs.into_iter().map(|(t, w)| (term_name(t), w)).collect()),
        });
        query_sources.push(source);
    }

    let dim = params.embedding_dim;
    let centers: Vec<Vec<f64>> = (0..params.topics)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let noise_scale = params.embedding_noise / (dim as f64).sqrt();
    let mut embeddings = EmbeddingStore::new(dim);
    for (doc, &topic) in docs.iter().zip(&doc_topics) {
        let mut v: Vec<f64> = centers[topic]
            .iter()
            .map(|c| {
                let n: f64 = StandardNormal.sample(&mut rng);
                round_to(c + noise_scale * n, 6)
            })
            .collect();
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1e-6;
        }
        embeddings.insert(doc.external_id.clone(), v)?;
    }

    Ok(SyntheticData {
        vocab,
        docs,
        doc_topics,
        queries,
        query_sources,
        judgments,
        embeddings,
    })
}

/// Text files for the corpus, queries, judgments and embeddings, in that order.
pub struct SyntheticFiles {
    pub corpus: String,
    pub queries: String,
    pub judgments: String,
    pub embeddings: String,
}

pub fn render(data: &SyntheticData) -> SyntheticFiles {
    let mut corpus = String::new();
    for d in &data.docs {
        let pairs = d.vector.entries().iter().map(|&(t, w)| (term_name(t.0), w));
        format_vector_line(&d.external_id, pairs, &mut corpus);
    }
    let mut queries = String::new();
    for q in &data.queries {
        if let RecordBody::Pairs(pairs) = &q.body {
            format_vector_line(&q.id, pairs.iter().cloned(), &mut queries);
        }
    }
    let mut judgments = String::new();
    for (qid, docs) in data.judgments.iter() {
        for d in docs {
            judgments.push_str(&format!("{qid}\t{d}\n"));
        }
    }
    let mut embeddings = String::new();
    for d in &data.docs {
        let v = data
            .embeddings
            .get(&d.external_id)
            .expect("every doc has an embedding");
        let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        embeddings.push_str(&format!("{}\t{}\n", d.external_id, parts.join(" ")));
    }
    SyntheticFiles {
        corpus,
        queries,
        judgments,
        embeddings,
    }
}
