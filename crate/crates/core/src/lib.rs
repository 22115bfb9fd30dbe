//! Sparse lexical retrieval over an inverted impact index, with the pruning
//! controls, training losses and evaluation metrics used to study its
//! efficiency/effectiveness trade-off.

pub mod harness;
pub mod index;
pub mod losses;
pub mod metrics;
pub mod retrieval;
pub mod sparse;

pub use index::{
    build_index, load_index, prune_index, save_index, ImpactIndex, IndexError, Vocabulary,
};
pub use retrieval::{search, RetrievalError, SearchOutcome, SearchParams, SearchResult};
pub use sparse::{SparseError, SparseVector, TermId};
