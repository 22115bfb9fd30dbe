//! Inverted impact index: vocabulary, document table and per-term posting lists.
//!
//! Postings are ordered by document ordinal and carry 32-bit impacts. Weights are
//! quantized to `f32` before document-centric pruning, so the terms kept by
//! [`build_index`] and [`prune_index`] are always chosen on the stored values.

mod format;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::sparse::{SparseVector, TermId};

pub use format::{load_index, read_index, save_index, write_index, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("document {doc:?} references term {term} outside a vocabulary of {vocab_size}")]
    TermOutOfRange {
        doc: String,
        term: TermId,
        vocab_size: usize,
    },
    #[error("document {doc:?} has a weight for term {term} that overflows a 32-bit impact")]
    ImpactOverflow { doc: String, term: TermId },
    #[error("too many {0} for 32-bit ordinals")]
    TooLarge(&'static str),
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u32),
    #[error("index file is truncated")]
    TruncatedFile,
    #[error("index checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bijection between term strings and [`TermId`]s, ids assigned in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    lookup: HashMap<String, TermId>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Vocabulary whose term strings are the decimal ids `0..size`.
    pub fn numeric(size: u32) -> Self {
        let mut vocab = Self::new();
        for i in 0..size {
            vocab.intern(&i.to_string());
        }
        vocab
    }

    pub fn from_terms<I, S>(terms: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for term in terms {
            let term = term.into();
            if vocab.lookup.contains_key(&term) {
                return Err(IndexError::Corrupt(format!(
                    "duplicate vocabulary term {term:?}"
                )));
            }
            vocab.intern(&term);
        }
        Ok(vocab)
    }

    pub fn intern(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.lookup.get(term) {
            return id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("vocabulary exceeds u32 ids"));
        self.terms.push(term.to_owned());
        self.lookup.insert(term.to_owned(), id);
        id
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.lookup.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, id: TermId) -> bool {
        id.index() < self.terms.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocRecord {
    pub external_id: String,
    pub ordinal: u32,
    /// Entries stored for this document after pruning.
    pub term_count: u32,
    /// Token count before vectorization.
    pub raw_length: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posting {
    pub doc: u32,
    pub impact: f32,
}

/// One document to ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct DocInput {
    pub external_id: String,
    pub vector: SparseVector,
    pub raw_length: u32,
}

impl DocInput {
    pub fn new(external_id: impl Into<String>, vector: SparseVector, raw_length: u32) -> Self {
        Self {
            external_id: external_id.into(),
            vector,
            raw_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactIndex {
    vocab: Vocabulary,
    docs: Vec<DocRecord>,
    postings: Vec<Vec<Posting>>,
    avg_raw_length: f64,
}

/// Builds an index; `document_k` of `None` or `Some(0)` disables document-centric pruning.
pub fn build_index<I>(
    vocab: Vocabulary,
    corpus: I,
    document_k: Option<usize>,
) -> Result<ImpactIndex, IndexError>
where
    I: IntoIterator<Item = DocInput>,
{
    let document_k = document_k.filter(|&k| k > 0);
    let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); vocab.len()];
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut raw_total = 0u64;

    for doc in corpus {
        if !seen.insert(doc.external_id.clone()) {
            return Err(IndexError::DuplicateDocId(doc.external_id));
        }
        let ordinal = u32::try_from(docs.len()).map_err(|_| IndexError::TooLarge("documents"))?;
        let mut quantized = Vec::with_capacity(doc.vector.len());
        for &(term, weight) in doc.vector.entries() {
            if !vocab.contains(term) {
                return Err(IndexError::TermOutOfRange {
                    doc: doc.external_id,
                    term,
                    vocab_size: vocab.len(),
                });
            }
            let impact = weight as f32;
            if !impact.is_finite() {
                return Err(IndexError::ImpactOverflow {
                    doc: doc.external_id,
                    term,
                });
            }
            // underflow to zero means the entry is not stored
            if impact > 0.0 {
                quantized.push((term, f64::from(impact)));
            }
        }
        let mut stored = SparseVector::from_sorted_unchecked(quantized);
        if let Some(k) = document_k {
            stored = stored.top_k_truncate(k);
        }
        for &(term, impact) in stored.entries() {
            postings[term.index()].push(Posting {
                doc: ordinal,
                impact: impact as f32,
            });
        }
        raw_total += u64::from(doc.raw_length);
        docs.push(DocRecord {
            external_id: doc.external_id,
            ordinal,
            term_count: stored.len() as u32,
            raw_length: doc.raw_length,
        });
    }

    let avg_raw_length = if docs.is_empty() {
        0.0
    } else {
        raw_total as f64 / docs.len() as f64
    };
    Ok(ImpactIndex {
        vocab,
        docs,
        postings,
        avg_raw_length,
    })
}

/// Re-applies document-centric pruning to an existing index.
pub fn prune_index(index: &ImpactIndex, document_k: usize) -> ImpactIndex {
    assert!(document_k >= 1, "document_k must be at least 1");
    let corpus = index.document_inputs();
    build_index(index.vocab.clone(), corpus, Some(document_k))
        .expect("an index always rebuilds from its own documents")
}

impl ImpactIndex {
    /// Assembles an index from already-validated parts. Used by the file reader.
    pub(crate) fn from_parts(
        vocab: Vocabulary,
        docs: Vec<DocRecord>,
        postings: Vec<Vec<Posting>>,
    ) -> Self {
        let avg_raw_length = if docs.is_empty() {
            0.0
        } else {
            docs.iter().map(|d| u64::from(d.raw_length)).sum::<u64>() as f64 / docs.len() as f64
        };
        Self {
            vocab,
            docs,
            postings,
            avg_raw_length,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn docs(&self) -> &[DocRecord] {
        &self.docs
    }

    pub fn doc(&self, ordinal: u32) -> &DocRecord {
        &self.docs[ordinal as usize]
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Posting list for `term`; empty for terms outside the vocabulary.
    pub fn postings(&self, term: TermId) -> &[Posting] {
        self.postings
            .get(term.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_postings(&self) -> &[Vec<Posting>] {
        &self.postings
    }

    pub fn df(&self, term: TermId) -> usize {
        self.postings(term).len()
    }

    /// Fraction of documents in which `term` is active.
    pub fn p_d(&self, term: TermId) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.df(term) as f64 / self.docs.len() as f64
        }
    }

    pub fn avg_raw_length(&self) -> f64 {
        self.avg_raw_length
    }

    pub fn total_postings(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    /// Per-document vectors rebuilt from the posting lists.
    pub fn document_vectors(&self) -> Vec<SparseVector> {
        let mut rows: Vec<Vec<(TermId, f64)>> = self
            .docs
            .iter()
            .map(|d| Vec::with_capacity(d.term_count as usize))
            .collect();
        for (term, list) in self.postings.iter().enumerate() {
            for p in list {
                rows[p.doc as usize].push((TermId(term as u32), f64::from(p.impact)));
            }
        }
        rows.into_iter()
            .map(SparseVector::from_sorted_unchecked)
            .collect()
    }

    pub fn document_inputs(&self) -> Vec<DocInput> {
        self.document_vectors()
            .into_iter()
            .zip(&self.docs)
            .map(|(vector, d)| DocInput::new(d.external_id.clone(), vector, d.raw_length))
            .collect()
    }

    pub fn stats(&self) -> IndexStats {
        index_stats(self)
    }
}

pub const P_D_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexStats {
    pub doc_count: u64,
    pub vocab_size: u64,
    pub total_postings: u64,
    pub mean_postings_per_term: f64,
    pub mean_term_count: f64,
    pub max_term_count: u32,
    /// Counts of active terms (df > 0) by p_D decile; the last bin includes p_D = 1.
    pub p_d_histogram: [u64; P_D_BINS],
}

pub fn index_stats(index: &ImpactIndex) -> IndexStats {
    let total = index.total_postings() as u64;
    let doc_count = index.doc_count() as u64;
    let vocab_size = index.vocab_size() as u64;
    let mut hist = [0u64; P_D_BINS];
    for list in index.postings.iter().filter(|l| !l.is_empty()) {
        let p = list.len() as f64 / doc_count as f64;
        let bin = ((p * P_D_BINS as f64) as usize).min(P_D_BINS - 1);
        hist[bin] += 1;
    }
    IndexStats {
        doc_count,
        vocab_size,
        total_postings: total,
        mean_postings_per_term: if vocab_size == 0 {
            0.0
        } else {
            total as f64 / vocab_size as f64
        },
        mean_term_count: if doc_count == 0 {
            0.0
        } else {
            total as f64 / doc_count as f64
        },
        max_term_count: index.docs.iter().map(|d| d.term_count).max().unwrap_or(0),
        p_d_histogram: hist,
    }
}
