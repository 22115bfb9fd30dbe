use spix::harness::formats::{
    corpus_inputs, format_result_lines, parse_embeddings, parse_judgments, parse_records,
    parse_results, prepare_queries, InputMode,
};
use spix::harness::sweep::{run_sweep, Materialize, SweepInputs, SweepSpec, CSV_COLUMNS};
use spix::harness::synthetic::{generate, render, SyntheticParams};
use spix::harness::{evaluate, run_queries, HarnessError};
use spix::index::build_index;
use spix::metrics::SssAggregation;
use spix::retrieval::Bm25Params;
use spix::SearchParams;

fn small() -> SyntheticParams {
    SyntheticParams {
        doc_count: 400,
        vocab_size: 2000,
        query_count: 50,
        topics: 10,
        ..Default::default()
    }
}

#[test]
fn generated_files_are_byte_identical() {
    let p = SyntheticParams {
        doc_count: 100,
        vocab_size: 1000,
        query_count: 20,
        topics: 5,
        ..Default::default()
    };
    let a = render(&generate(1, &p).unwrap());
    let b = render(&generate(1, &p).unwrap());
    assert_eq!(a.corpus, b.corpus);
    assert_eq!(a.queries, b.queries);
    assert_eq!(a.judgments, b.judgments);
    assert_eq!(a.embeddings, b.embeddings);
    assert_ne!(a.corpus, render(&generate(2, &p).unwrap()).corpus);
}

/// Rendered files parse back to the same corpus, and the baseline sweep row
/// agrees with a standalone search, results file round trip and evaluation.
#[test]
fn baseline_row_matches_search_then_eval() {
    let data = generate(5, &small()).unwrap();
    let files = render(&data);
    let corpus = parse_records("corpus", &files.corpus, InputMode::Vector).unwrap();
    let queries = parse_records("queries", &files.queries, InputMode::Vector).unwrap();
    let judgments = parse_judgments("judgments", &files.judgments).unwrap();
    let embeddings = parse_embeddings("embeddings", &files.embeddings).unwrap();
    let (vocab, docs) = corpus_inputs(&corpus, Bm25Params::default()).unwrap();
    assert_eq!(judgments, data.judgments);
    assert_eq!(embeddings, data.embeddings);

    let index = build_index(vocab.clone(), docs.clone(), None).unwrap();
    let prepared = prepare_queries(&index, &queries).unwrap();
    let outcomes = run_queries(&index, &prepared, &SearchParams::default(), 1, 3);
    let mut results = String::new();
    for o in &outcomes {
        format_result_lines(&o.id, &o.outcome.as_ref().unwrap().results, &mut results);
    }
    let run = parse_results("results", &results).unwrap();
    let report = evaluate(&run, &judgments, Some(&embeddings), 10, SssAggregation::Max).unwrap();

    let inputs = SweepInputs {
        vocab: &vocab,
        docs: &docs,
        queries: &queries,
        judgments: &judgments,
        embeddings: Some(&embeddings),
    };
    let spec = SweepSpec {
        thresholds: vec![0.0],
        ..Default::default()
    };
    let row = &run_sweep(&inputs, &spec, 2, Materialize::InMemory).unwrap()[0];
    assert_eq!(row.mrr_at_k, report.mrr);
    assert_eq!(row.sss_at_k, report.sss);
}

/// The generator's judged documents rank well above chance: a random ranking of
/// the 400 documents puts the single relevant one in the top 10 with MRR
/// (1/400) * sum_{r<=10} 1/r, about 0.0073.
#[test]
fn generator_beats_random_ranking() {
    let p = small();
    let data = generate(11, &p).unwrap();
    let index = build_index(data.vocab.clone(), data.docs.clone(), None).unwrap();
    let prepared = prepare_queries(&index, &data.queries).unwrap();
    let outcomes = run_queries(&index, &prepared, &SearchParams::default(), 1, 1);
    let run = spix::harness::to_run_results(&outcomes);
    let report = evaluate(&run, &data.judgments, None, 10, SssAggregation::Max).unwrap();
    let random: f64 = (1..=10).map(|r| 1.0 / r as f64).sum::<f64>() / p.doc_count as f64;
    assert!(
        report.mrr > 10.0 * random,
        "MRR {} vs random {random}",
        report.mrr
    );
}

#[test]
fn sweep_csv_shape_and_candidate_order() {
    let data = generate(3, &small()).unwrap();
    let inputs = SweepInputs {
        vocab: &data.vocab,
        docs: &data.docs,
        queries: &data.queries,
        judgments: &data.judgments,
        embeddings: Some(&data.embeddings),
    };
    let spec = SweepSpec {
        document_k: vec![0, 10],
        query_k: vec![0, 5, 7],
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let rows = run_sweep(&inputs, &spec, 2, Materialize::Directory(dir.path())).unwrap();
    assert_eq!(rows.len(), 30);
    assert!(dir.path().join("index-dk10.spix").exists());
    for cell in rows.chunks(5) {
        assert!(cell
            .windows(2)
            .all(|w| w[1].candidates_post_mean <= w[0].candidates_post_mean));
        assert!(cell
            .iter()
            .all(|r| r.candidates_pre_mean == cell[0].candidates_pre_mean));
        assert!(cell.iter().all(|r| r.flops == cell[0].flops));
    }
    // FLOPS falls with document pruning at fixed query_k
    for (full, pruned) in rows[..15].iter().zip(&rows[15..]) {
        assert!(pruned.flops <= full.flops);
    }
    let csv = spix::harness::sweep::rows_to_csv(&rows).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert!(lines.all(|l| l.split(',').count() == CSV_COLUMNS.len()));
}

#[test]
fn malformed_line_is_reported_with_its_number() {
    let text = "a\tx:1\nb\ty:2\n\nc\tz:oops\n";
    match parse_records("corpus.tsv", text, InputMode::Vector) {
        Err(HarnessError::Parse {
            source_name, line, ..
        }) => {
            assert_eq!(source_name, "corpus.tsv");
            assert_eq!(line, 4);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}
