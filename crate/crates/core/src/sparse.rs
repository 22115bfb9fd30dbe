//! Sorted sparse term-weight vectors and the dot product every model scores with.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Ordinal of a term in a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for TermId {
    fn from(value: u32) -> Self {
        TermId(value)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("term {0} appears more than once")]
    DuplicateTerm(TermId),
    #[error("term {term} has negative weight {weight}")]
    NegativeWeight { term: TermId, weight: f64 },
    #[error("term {0} has a non-finite weight")]
    NonFinite(TermId),
}

/// Term-weight pairs, strictly ascending by term, every weight positive and finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(TermId, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from unordered pairs. Zero weights are dropped silently.
    pub fn from_pairs<I, T>(pairs: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: Into<TermId>,
    {
        let mut entries = Vec::new();
        for (term, weight) in pairs {
            let term = term.into();
            if !weight.is_finite() {
                return Err(SparseError::NonFinite(term));
            }
            if weight < 0.0 {
                return Err(SparseError::NegativeWeight { term, weight });
            }
            // -0.0 lands here too
            if weight == 0.0 {
                continue;
            }
            entries.push((term, weight));
        }
        entries.sort_unstable_by_key(|&(t, _)| t);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(SparseError::DuplicateTerm(w[0].0));
        }
        Ok(Self { entries })
    }

    /// Wraps entries the caller already knows to be valid and sorted.
    pub(crate) fn from_sorted_unchecked(entries: Vec<(TermId, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(_, w)| w > 0.0 && w.is_finite()));
        Self { entries }
    }

    pub fn entries(&self) -> &[(TermId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }

    pub fn get(&self, term: TermId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Sum over shared terms of weight products, accumulated in ascending term order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Keeps the `k` heaviest entries. Ties at the cutoff keep the smaller term.
    pub fn top_k_truncate(&self, k: usize) -> SparseVector {
        assert!(k >= 1, "top-k truncation needs k >= 1");
        if self.entries.len() <= k {
            return self.clone();
        }
        let mut ranked = self.entries.clone();
        ranked.select_nth_unstable_by(k - 1, heavier_first);
        ranked.truncate(k);
        ranked.sort_unstable_by_key(|&(t, _)| t);
        SparseVector { entries: ranked }
    }

    /// Drops every entry rejected by `keep`.
    pub fn retain(&self, mut keep: impl FnMut(TermId, f64) -> bool) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(t, w)| keep(t, w))
                .collect(),
        }
    }
}

fn heavier_first(a: &(TermId, f64), b: &(TermId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}
