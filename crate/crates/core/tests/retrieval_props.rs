mod common;

use proptest::prelude::*;

use common::*;
use spix::index::build_index;
use spix::retrieval::{
    plan_query, rank_top_n, required_matches, retrieve_candidates, threshold_filter, CandidateSet,
};
use spix::{search, SearchParams, SparseVector, TermId};

fn instance() -> impl Strategy<Value = (u64, f64)> {
    (
        any::<u64>(),
        prop_oneof![
            Just(0.0),
            Just(0.2),
            Just(0.5),
            Just(0.8),
            Just(1.0),
            0.0..=1.0f64
        ],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accumulator_matches_exhaustive_dot((seed, threshold) in instance()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 120, 40, 15, 3, 10);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        for q in &inst.queries {
            let params = SearchParams::new(10, 0, threshold).unwrap();
            let plan = plan_query(&to_vector(q), &params, &index).unwrap();
            let cands = retrieve_candidates(&index, &plan);
            let want = exhaustive_scores(&inst.docs, q);
            prop_assert_eq!(cands.len(), want.len());
            for (doc, score, matched) in want {
                let c = cands.get(doc as u32).expect("every sharing document is a candidate");
                prop_assert!(rel_close(c.score, score, 1e-12));
                prop_assert_eq!(c.matched_terms as usize, matched);
            }
        }
    }

    #[test]
    fn results_respect_plan((seed, threshold) in instance()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 120, 40, 15, 3, 10);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        for q in &inst.queries {
            let out = search(&index, &to_vector(q), &SearchParams::new(7, 0, threshold).unwrap()).unwrap();
            prop_assert_eq!(out.required_matches, required_matches(threshold, q.len()));
            prop_assert!(out.results.len() <= 7);
            prop_assert!(out.candidates_post_filter <= out.candidates_pre_filter);
            for w in out.results.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].doc < w[1].doc));
            }
            for r in &out.results {
                prop_assert!(r.matched_terms as usize >= out.required_matches);
                prop_assert_eq!(&r.external_id, &format!("doc{}", r.doc));
            }
        }
    }

    #[test]
    fn threshold_zero_equals_unfiltered(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 150, 50, 12, 3, 10);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        for q in &inst.queries {
            let params = SearchParams::new(10, 0, 0.0).unwrap();
            let plan = plan_query(&to_vector(q), &params, &index).unwrap();
            let all = retrieve_candidates(&index, &plan);
            let unfiltered = rank_top_n(&index, &all, 10);
            let filtered = rank_top_n(&index, &threshold_filter(all, &plan), 10);
            prop_assert_eq!(unfiltered, filtered);
        }
    }

    #[test]
    fn rank_top_n_matches_full_sort(seed in any::<u64>(), top_n in 1usize..30) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 200, 30, 10, 2, 8);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        for q in &inst.queries {
            let plan = plan_query(&to_vector(q), &SearchParams::default(), &index).unwrap();
            let cands = retrieve_candidates(&index, &plan);
            let got: Vec<u32> = rank_top_n(&index, &cands, top_n).iter().map(|r| r.doc).collect();
            let mut all: Vec<(usize, f64, usize)> = cands
                .candidates
                .iter()
                .map(|c| (c.doc as usize, c.score, c.matched_terms as usize))
                .collect();
            all = sort_and_truncate(all, top_n);
            let want: Vec<u32> = all.iter().map(|c| c.0 as u32).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn removing_a_query_term_never_raises_a_score(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 150, 30, 12, 3, 10);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        for q in inst.queries.iter().filter(|q| q.len() >= 2) {
            let full = to_vector(q);
            let drop = q[q.len() / 2].0;
            let reduced = full.retain(|t, _| t != TermId(drop));
            let params = SearchParams::default();
            let a = retrieve_candidates(&index, &plan_query(&full, &params, &index).unwrap());
            let b = retrieve_candidates(&index, &plan_query(&reduced, &params, &index).unwrap());
            for c in &b.candidates {
                prop_assert!(c.score <= a.get(c.doc).unwrap().score);
            }
        }
    }
}

#[test]
fn conjunction_with_an_unused_term_is_empty() {
    let docs = vec![
        spix::index::DocInput::new(
            "A",
            SparseVector::from_pairs([(0u32, 1.0), (1, 1.0)]).unwrap(),
            2,
        ),
        spix::index::DocInput::new("B", SparseVector::from_pairs([(1u32, 2.0)]).unwrap(), 1),
    ];
    let index = build_index(spix::Vocabulary::numeric(3), docs, None).unwrap();
    let q = SparseVector::from_pairs([(0u32, 1.0), (1, 1.0), (2, 1.0)]).unwrap();
    let out = search(&index, &q, &SearchParams::new(10, 0, 1.0).unwrap()).unwrap();
    assert!(out.results.is_empty());
    assert_eq!(out.candidates_pre_filter, 2);
    assert_eq!(out.candidates_post_filter, 0);
    assert_eq!(
        threshold_filter(
            CandidateSet::default(),
            &plan_query(&q, &SearchParams::default(), &index).unwrap()
        )
        .len(),
        0
    );
}
