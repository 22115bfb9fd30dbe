mod common;

use proptest::prelude::*;

use common::*;
use spix::index::{build_index, index_stats, load_index, save_index, IndexError, P_D_BINS};
use spix::{prune_index, TermId};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pruned_build_equals_pruning_the_full_build(seed in any::<u64>(), k in 1usize..12) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 100, 60, 20, 0, 0);
        let full = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        let direct = build_index(inst.vocab(), inst.doc_inputs(), Some(k)).unwrap();
        prop_assert_eq!(&prune_index(&full, k), &direct);
        prop_assert!(direct.docs().iter().all(|d| d.term_count as usize <= k));
        // each kept term set is the naive top-k of the document
        for (doc, pairs) in direct.document_vectors().iter().zip(&inst.docs) {
            let want = naive_top_k(pairs, k);
            let got: Pairs = doc.entries().iter().map(|&(t, w)| (t.0, w)).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn stats_are_consistent(seed in any::<u64>(), dk in 0usize..8) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 100, 60, 20, 0, 0);
        let index = build_index(inst.vocab(), inst.doc_inputs(), Some(dk)).unwrap();
        let stats = index_stats(&index);
        let term_total: u64 = index.docs().iter().map(|d| u64::from(d.term_count)).sum();
        prop_assert_eq!(stats.total_postings, term_total);
        prop_assert_eq!(stats.doc_count, inst.docs.len() as u64);
        prop_assert_eq!(stats.vocab_size, u64::from(inst.vocab_size));
        let active = (0..inst.vocab_size).filter(|&t| index.df(TermId(t)) > 0).count() as u64;
        prop_assert_eq!(stats.p_d_histogram.iter().sum::<u64>(), active);
        prop_assert_eq!(stats.p_d_histogram.len(), P_D_BINS);
        for t in 0..inst.vocab_size {
            let p = index.p_d(TermId(t));
            prop_assert!((0.0..=1.0).contains(&p));
            let list = index.postings(TermId(t));
            prop_assert!(list.windows(2).all(|w| w[0].doc < w[1].doc));
        }
    }

    #[test]
    fn file_round_trip(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let inst = Instance::random(&mut rng, 60, 40, 10, 0, 0);
        let index = build_index(inst.vocab(), inst.doc_inputs(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.spix");
        save_index(&index, &path).unwrap();
        prop_assert_eq!(load_index(&path).unwrap(), index);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_index(dir.path().join("absent")),
        Err(IndexError::Io(_))
    ));
}

#[test]
fn out_of_vocabulary_term_is_rejected() {
    let doc = spix::index::DocInput::new("A", to_vector(&vec![(5, 1.0)]), 1);
    let err = build_index(spix::Vocabulary::numeric(3), vec![doc], None).unwrap_err();
    assert!(matches!(err, IndexError::TermOutOfRange { .. }));
}
