//! Experiment runner behind the command-line tools: batch search over a worker
//! pool, evaluation, the pruning and threshold sweep, the loss self-test and
//! the synthetic data generator.

pub mod formats;
pub mod selftest;
pub mod sweep;
pub mod synthetic;

use std::thread;

use thiserror::Error;

use crate::index::{ImpactIndex, IndexError};
use crate::metrics::{
    mrr_at_k, sss_at_k, EmbeddingStore, Judgments, MetricsError, QueryRun, RunResults,
    SssAggregation,
};
use crate::retrieval::{search, RetrievalError, SearchOutcome, SearchParams};

pub use formats::{InputMode, PreparedQuery, Record, RecordBody};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// One query's search, repeated for latency measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub id: String,
    /// Search result of the first repetition.
    pub outcome: Result<SearchOutcome, RetrievalError>,
    /// Mean wall-clock seconds over the repetitions.
    pub latency_secs: f64,
}

/// Splits `items` into `workers` contiguous chunks, maps each on its own thread and
/// concatenates in input order, so output never depends on scheduling.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("search worker panicked"))
            .collect()
    })
}

pub fn run_queries(
    index: &ImpactIndex,
    queries: &[PreparedQuery],
    params: &SearchParams,
    repetitions: usize,
    workers: usize,
) -> Vec<QueryOutcome> {
    run_query_grid(
        index,
        queries,
        std::slice::from_ref(params),
        repetitions,
        workers,
    )
    .pop()
    .expect("one parameter set")
}

/// Runs every query under each parameter set; returns one outcome list per set.
///
/// A query is timed under all sets back to back, rotating which set goes first,
/// so drift in machine speed spreads evenly over the sets instead of landing on
/// whichever was measured during a slow stretch.
pub fn run_query_grid(
    index: &ImpactIndex,
    queries: &[PreparedQuery],
    params: &[SearchParams],
    repetitions: usize,
    workers: usize,
) -> Vec<Vec<QueryOutcome>> {
    let repetitions = repetitions.max(1);
    let sets = params.len();
    let per_query = map_ordered(queries, workers, |q| {
        let mut firsts: Vec<Option<Result<SearchOutcome, RetrievalError>>> = vec![None; sets];
        let mut totals = vec![0.0f64; sets];
        for rep in 0..repetitions {
            for offset in 0..sets {
                let i = (rep + offset) % sets;
                let outcome = search(index, &q.vector, &params[i]);
                if let Ok(o) = &outcome {
                    totals[i] += o.elapsed.as_secs_f64();
                }
                if firsts[i].is_none() {
                    firsts[i] = Some(outcome);
                }
            }
        }
        firsts
            .into_iter()
            .zip(totals)
            .map(|(first, total)| QueryOutcome {
                id: q.id.clone(),
                outcome: first.expect("at least one repetition"),
                latency_secs: total / repetitions as f64,
            })
            .collect::<Vec<_>>()
    });
    let mut grid: Vec<Vec<QueryOutcome>> = (0..sets)
        .map(|_| Vec::with_capacity(queries.len()))
        .collect();
    for row in per_query {
        for (i, o) in row.into_iter().enumerate() {
            grid[i].push(o);
        }
    }
    grid
}

/// Collects outcomes into a run; failed queries appear with no hits.
pub fn to_run_results(outcomes: &[QueryOutcome]) -> RunResults {
    let mut run = RunResults::new();
    for o in outcomes {
        let query_run = match &o.outcome {
            Ok(out) => QueryRun {
                hits: out
                    .results
                    .iter()
                    .map(|r| (r.external_id.clone(), r.score))
                    .collect(),
                latency_secs: o.latency_secs,
                candidates_pre_filter: out.candidates_pre_filter,
                candidates_post_filter: out.candidates_post_filter,
            },
            Err(_) => QueryRun::default(),
        };
        run.insert(o.id.clone(), query_run);
    }
    run
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub judged_queries: usize,
    pub run_queries: usize,
    pub mrr: f64,
    pub sss: Option<f64>,
}

impl EvalReport {
    pub fn to_key_value(&self) -> String {
        let mut s = format!(
            "k\t{}\njudged_queries\t{}\nrun_queries\t{}\nmrr_at_k\t{}\n",
            self.k, self.judged_queries, self.run_queries, self.mrr
        );
        if let Some(sss) = self.sss {
            s.push_str(&format!("sss_at_k\t{sss}\n"));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!(
            "k,judged_queries,run_queries,mrr_at_k,sss_at_k\n{},{},{},{},{}\n",
            self.k,
            self.judged_queries,
            self.run_queries,
            self.mrr,
            self.sss.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

pub fn evaluate(
    run: &RunResults,
    judgments: &Judgments,
    embeddings: Option<&EmbeddingStore>,
    k: usize,
    aggregation: SssAggregation,
) -> Result<EvalReport, HarnessError> {
    let mrr = mrr_at_k(run, judgments, k)?;
    let sss = embeddings
        .map(|store| sss_at_k(run, judgments, store, k, aggregation))
        .transpose()?;
    Ok(EvalReport {
        k,
        judged_queries: judgments.len(),
        run_queries: run.queries.len(),
        mrr,
        sss,
    })
}
