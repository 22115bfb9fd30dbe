//! Grid sweep over document-centric pruning, query-term selection and the match
//! threshold. One CSV row per (document_k, query_k, threshold) cell.

use std::path::Path;

use serde::Serialize;

use crate::index::{build_index, load_index, save_index, DocInput, ImpactIndex, Vocabulary};
use crate::metrics::{flops_estimate, EmbeddingStore, Judgments, SssAggregation};
use crate::retrieval::{select_query_terms, SearchParams};
use crate::sparse::SparseVector;

use super::formats::{prepare_queries, Record};
use super::{evaluate, run_query_grid, to_run_results, HarnessError, QueryOutcome};

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

/// Columns of the sweep CSV, in order.
pub const CSV_COLUMNS: [&str; 9] = [
    "document_k",
    "query_k",
    "threshold",
    "latency_mean_s",
    "mrr_at_k",
    "sss_at_k",
    "flops",
    "candidates_pre_mean",
    "candidates_post_mean",
];

/// Columns that hold wall-clock measurements.
pub const LATENCY_COLUMNS: [&str; 1] = ["latency_mean_s"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// 0 means no document pruning.
    pub document_k: Vec<usize>,
    /// 0 means no query-term selection.
    pub query_k: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub top_n: usize,
    pub repetitions: usize,
    /// Cutoff for MRR@k and SSS@k.
    pub metric_k: usize,
    pub sss_aggregation: SssAggregation,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            document_k: vec![0],
            query_k: vec![0],
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            top_n: 10,
            repetitions: 1,
            metric_k: 10,
            sss_aggregation: SssAggregation::Max,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_owned()));
        if self.document_k.is_empty() || self.query_k.is_empty() || self.thresholds.is_empty() {
            return bad("sweep lists must be non-empty");
        }
        if self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("thresholds must lie in [0, 1]");
        }
        if self.top_n == 0 || self.repetitions == 0 || self.metric_k == 0 {
            return bad("top_n, repetitions and metric k must be at least 1");
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.document_k.len() * self.query_k.len() * self.thresholds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub document_k: usize,
    pub query_k: usize,
    pub threshold: f64,
    pub latency_mean_s: f64,
    pub mrr_at_k: f64,
    pub sss_at_k: Option<f64>,
    pub flops: f64,
    pub candidates_pre_mean: f64,
    pub candidates_post_mean: f64,
}

pub struct SweepInputs<'a> {
    pub vocab: &'a Vocabulary,
    pub docs: &'a [DocInput],
    pub queries: &'a [Record],
    pub judgments: &'a Judgments,
    pub embeddings: Option<&'a EmbeddingStore>,
}

/// Where per-`document_k` indexes are materialized. With a directory, each index
/// is written and read back before it is searched.
#[derive(Debug, Clone, Copy)]
pub enum Materialize<'a> {
    InMemory,
    Directory(&'a Path),
}

pub fn build_for_document_k(
    inputs: &SweepInputs<'_>,
    document_k: usize,
    materialize: Materialize<'_>,
) -> Result<ImpactIndex, HarnessError> {
    let index = build_index(
        inputs.vocab.clone(),
        inputs.docs.iter().cloned(),
        Some(document_k),
    )?;
    match materialize {
        Materialize::InMemory => Ok(index),
        Materialize::Directory(dir) => {
            let path = dir.join(format!("index-dk{document_k}.spix"));
            save_index(&index, &path)?;
            Ok(load_index(&path)?)
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Rows for one index across the query_k x threshold sub-grid.
pub fn sweep_index(
    index: &ImpactIndex,
    document_k: usize,
    inputs: &SweepInputs<'_>,
    spec: &SweepSpec,
    workers: usize,
) -> Result<Vec<SweepRow>, HarnessError> {
    let prepared = prepare_queries(index, inputs.queries)?;
    let mut rows = Vec::new();
    for &query_k in &spec.query_k {
        let selected: Vec<SparseVector> = prepared
            .iter()
            .map(|q| select_query_terms(&q.vector, query_k))
            .collect();
        let flops = if selected.is_empty() {
            0.0
        } else {
            flops_estimate(index, &selected)?
        };
        let params = spec
            .thresholds
            .iter()
            .map(|&threshold| SearchParams::new(spec.top_n, query_k, threshold))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = run_query_grid(index, &prepared, &params, spec.repetitions, workers);
        for (outcomes, &threshold) in grid.iter().zip(&spec.thresholds) {
            rows.push(summarize(
                outcomes, document_k, query_k, threshold, flops, inputs, spec,
            )?);
        }
    }
    Ok(rows)
}

fn summarize(
    outcomes: &[QueryOutcome],
    document_k: usize,
    query_k: usize,
    threshold: f64,
    flops: f64,
    inputs: &SweepInputs<'_>,
    spec: &SweepSpec,
) -> Result<SweepRow, HarnessError> {
    let run = to_run_results(outcomes);
    let report = evaluate(
        &run,
        inputs.judgments,
        inputs.embeddings,
        spec.metric_k,
        spec.sss_aggregation,
    )?;
    let searched = || outcomes.iter().filter(|o| o.outcome.is_ok());
    let counts = |f: fn(&crate::retrieval::SearchOutcome) -> usize| {
        mean(
            outcomes
                .iter()
                .map(|o| o.outcome.as_ref().map_or(0, f) as f64),
        )
    };
    Ok(SweepRow {
        document_k,
        query_k,
        threshold,
        latency_mean_s: mean(searched().map(|o| o.latency_secs)),
        mrr_at_k: report.mrr,
        sss_at_k: report.sss,
        flops,
        candidates_pre_mean: counts(|o| o.candidates_pre_filter),
        candidates_post_mean: counts(|o| o.candidates_post_filter),
    })
}

pub fn run_sweep(
    inputs: &SweepInputs<'_>,
    spec: &SweepSpec,
    workers: usize,
    materialize: Materialize<'_>,
) -> Result<Vec<SweepRow>, HarnessError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.cells());
    for &document_k in &spec.document_k {
        let index = build_for_document_k(inputs, document_k, materialize)?;
        rows.extend(sweep_index(&index, document_k, inputs, spec, workers)?);
    }
    if rows.len() != spec.cells() {
        return Err(HarnessError::Invariant(format!(
            "sweep produced {} rows for {} cells",
            rows.len(),
            spec.cells()
        )));
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)
            .map_err(|e| HarnessError::Invariant(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row)
            .map_err(|e| HarnessError::Invariant(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Invariant(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Drops the latency columns so two runs can be compared byte for byte.
pub fn strip_latency_columns(csv_text: &str) -> String {
    let drop: Vec<usize> = CSV_COLUMNS
        .iter()
        .enumerate()
        .filter(|(_, c)| LATENCY_COLUMNS.contains(c))
        .map(|(i, _)| i)
        .collect();
    csv_text
        .lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::formats::{corpus_inputs, parse_records, InputMode};
    use crate::retrieval::Bm25Params;

    fn inputs_fixture() -> (Vocabulary, Vec<DocInput>, Vec<Record>, Judgments) {
        let corpus = "A\tx:2 y:1\nB\ty:3\nC\tx:0.5 z:1\n";
        let recs = parse_records("c", corpus, InputMode::Vector).unwrap();
        let (vocab, docs) = corpus_inputs(&recs, Bm25Params::default()).unwrap();
        let queries = parse_records("q", "q1\tx:1 y:1\nq2\tz:1\n", InputMode::Vector).unwrap();
        let judgments: Judgments = [("q1", "A"), ("q2", "C")].into_iter().collect();
        (vocab, docs, queries, judgments)
    }

    #[test]
    fn degenerate_grid_is_one_row() {
        let (vocab, docs, queries, judgments) = inputs_fixture();
        let inputs = SweepInputs {
            vocab: &vocab,
            docs: &docs,
            queries: &queries,
            judgments: &judgments,
            embeddings: None,
        };
        let spec = SweepSpec {
            thresholds: vec![0.0],
            ..Default::default()
        };
        let rows = run_sweep(&inputs, &spec, 1, Materialize::InMemory).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mrr_at_k, 1.0);
        assert_eq!(rows[0].sss_at_k, None);
        // q1 hits A, B, C; q2 hits C
        assert_eq!(rows[0].candidates_pre_mean, 2.0);
        let csv = rows_to_csv(&rows).unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn grid_size() {
        let (vocab, docs, queries, judgments) = inputs_fixture();
        let inputs = SweepInputs {
            vocab: &vocab,
            docs: &docs,
            queries: &queries,
            judgments: &judgments,
            embeddings: None,
        };
        let spec = SweepSpec {
            document_k: vec![0, 10],
            query_k: vec![0, 5, 7],
            ..Default::default()
        };
        assert_eq!(
            run_sweep(&inputs, &spec, 2, Materialize::InMemory)
                .unwrap()
                .len(),
            30
        );
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            thresholds: vec![1.2],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        spec.thresholds.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn strip_latency() {
        let text = format!("{}\n0,0,0,0.5,1,,0.1,2,1\n", CSV_COLUMNS.join(","));
        let stripped = strip_latency_columns(&text);
        assert!(!stripped.contains("latency"));
        assert!(stripped.ends_with("0,0,0,1,,0.1,2,1"));
    }
}
