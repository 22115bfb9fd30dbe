mod common;

use proptest::prelude::*;
use rand::Rng;

use common::*;
use spix::index::build_index;
use spix::metrics::{
    cosine, flops_estimate, latency_stats, mrr_at_k, sss_at_k, EmbeddingStore, Judgments,
    MetricsError, QueryRun, RunResults, SssAggregation,
};

/// Run, judgments and 3-d embeddings over `docs` documents and `queries` queries.
fn random_eval(seed: u64, docs: usize, queries: usize) -> (RunResults, Judgments, EmbeddingStore) {
    let mut rng = rng(seed);
    let mut store = EmbeddingStore::new(3);
    for d in 0..docs {
        let mut v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] += 2.5;
        store.insert(format!("d{d}"), v).unwrap();
    }
    let mut run = RunResults::new();
    let mut judgments = Judgments::new();
    for q in 0..queries {
        let qid = format!("q{q}");
        for _ in 0..rng.random_range(1..=3) {
            judgments.add(qid.clone(), format!("d{}", rng.random_range(0..docs)));
        }
        if rng.random_bool(0.9) {
            let n = rng.random_range(0..=docs.min(15));
            let mut ids: Vec<usize> = (0..docs).collect();
            for i in 0..n {
                let j = rng.random_range(i..docs);
                ids.swap(i, j);
            }
            let hits = ids[..n].iter().map(|d| (format!("d{d}"), 1.0)).collect();
            run.insert(
                qid,
                QueryRun {
                    hits,
                    ..Default::default()
                },
            );
        }
    }
    (run, judgments, store)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mrr_bounded_and_monotone_in_k(seed in any::<u64>()) {
        let (run, judgments, _) = random_eval(seed, 30, 12);
        let mut prev = 0.0;
        for k in 1..=20 {
            let m = mrr_at_k(&run, &judgments, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            prop_assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn sss_bounded(seed in any::<u64>()) {
        let (run, judgments, store) = random_eval(seed, 30, 12);
        for agg in [SssAggregation::Max, SssAggregation::Mean] {
            let s = sss_at_k(&run, &judgments, &store, 10, agg).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }
        let max = sss_at_k(&run, &judgments, &store, 10, SssAggregation::Max).unwrap();
        let mean = sss_at_k(&run, &judgments, &store, 10, SssAggregation::Mean).unwrap();
        prop_assert!(max >= mean - 1e-12);
    }

    #[test]
    fn cosine_bounded(a in prop::collection::vec(-5.0..5.0f64, 4), b in prop::collection::vec(-5.0..5.0f64, 4)) {
        prop_assume!(a.iter().any(|&x| x != 0.0) && b.iter().any(|&x| x != 0.0));
        let c = cosine(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - cosine(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn flops_matches_pair_intersection(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 80, 40, 12, 20, 10);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        let qv: Vec<_> = inst.queries.iter().map(to_vector).collect();
        let (_, want) = pair_intersection_flops(&inst.docs, &inst.queries);
        prop_assert!((flops_estimate(&index, &qv).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn latency_stats_match_sort_and_pick(samples in prop::collection::vec(0.0..10.0f64, 1..1000)) {
        let s = latency_stats(&samples).unwrap();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pick = |p: f64| sorted[((p * sorted.len() as f64).ceil() as usize).max(1) - 1];
        prop_assert_eq!(s.p50, pick(0.5));
        prop_assert_eq!(s.p95, pick(0.95));
        prop_assert_eq!(s.max, *sorted.last().unwrap());
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        prop_assert!(rel_close(s.mean, mean, 1e-12));
    }
}

#[test]
fn latency_stats_thousand_samples() {
    let mut rng = rng(8);
    let samples: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let s = latency_stats(&samples).unwrap();
    assert_eq!(s.p50, sorted[499]);
    assert_eq!(s.p95, sorted[949]);
    assert_eq!(s.max, sorted[999]);
}

#[test]
fn sss_is_one_when_retrieved_embeddings_are_truths() {
    let (mut run, judgments, mut store) = random_eval(3, 20, 6);
    // every retrieved doc shares an embedding with the query's first truth
    for (qid, truths) in judgments.iter() {
        let t = store.get(&truths[0]).unwrap().to_vec();
        let copies: Vec<(String, f64)> = (0..4).map(|i| (format!("{qid}-copy{i}"), 1.0)).collect();
        for (id, _) in &copies {
            store.insert(id.clone(), t.clone()).unwrap();
        }
        run.insert(
            qid,
            QueryRun {
                hits: copies,
                ..Default::default()
            },
        );
    }
    let s = sss_at_k(&run, &judgments, &store, 10, SssAggregation::Max).unwrap();
    assert!((s - 1.0).abs() < 1e-12);
}

#[test]
fn missing_embedding_names_the_document() {
    let mut run = RunResults::new();
    run.insert(
        "q",
        QueryRun {
            hits: vec![("ghost".into(), 1.0)],
            ..Default::default()
        },
    );
    let judgments: Judgments = [("q", "a")].into_iter().collect();
    let mut store = EmbeddingStore::new(2);
    store.insert("a", vec![1.0, 0.0]).unwrap();
    let err = sss_at_k(&run, &judgments, &store, 10, SssAggregation::Max).unwrap_err();
    assert_eq!(err, MetricsError::MissingEmbedding("ghost".into()));
}
