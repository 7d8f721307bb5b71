use proptest::prelude::*;

use swiftdep::enumerate::{derivations, projective_trees};
use swiftdep::fuzz::{check_enumeration, check_tree, fuzz_vocab};
use swiftdep::oracle::{expand_swift_to_eager, oracle_sequence, sentence_oracle, KindCounts};
use swiftdep::transition::replay;
use swiftdep::treebank::heads_projective;
use swiftdep::{
    is_projective, parse_conllu, random_projective_tree, write_conllu, GoldTree, LabelVocab,
    OracleVariant, ParserState, SystemId,
};

/// Projectivity by the descendant definition: every token strictly between
/// a head and its dependent is dominated by that head.
fn projective_by_dominance(heads: &[usize]) -> bool {
    let dominated = |mut t: usize, h: usize| {
        while t != 0 {
            if t == h {
                return true;
            }
            t = heads[t];
        }
        h == 0
    };
    (1..heads.len()).all(|d| {
        let h = heads[d];
        let (lo, hi) = (h.min(d), h.max(d));
        (lo + 1..hi).all(|t| dominated(t, h))
    })
}

fn arbitrary_tree() -> impl Strategy<Value = Vec<usize>> {
    (1usize..9).prop_flat_map(|n| {
        proptest::collection::vec(0..=n, n).prop_filter_map("must be a tree", move |raw| {
            let mut heads = vec![0];
            heads.extend(raw);
            let ok = (1..=n).all(|d| heads[d] != d) && {
                (1..=n).all(|d| {
                    let mut t = d;
                    for _ in 0..=n {
                        t = heads[t];
                        if t == 0 {
                            return true;
                        }
                    }
                    false
                })
            };
            ok.then_some(heads)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_trees_are_projective_trees(n in 1usize..40, seed in any::<u64>()) {
        let s = random_projective_tree(n, &fuzz_vocab(), seed).unwrap();
        prop_assert!(s.validate().is_ok());
        prop_assert!(is_projective(&s));
        prop_assert!(projective_by_dominance(&s.heads()));
        prop_assert_eq!(s.root_count(), 1);
        prop_assert_eq!(&s, &random_projective_tree(n, &fuzz_vocab(), seed).unwrap());
    }

    #[test]
    fn pairwise_check_matches_dominance(heads in arbitrary_tree()) {
        prop_assert_eq!(heads_projective(&heads), projective_by_dominance(&heads));
    }

    #[test]
    fn conllu_round_trip(n in 1usize..25, seed in any::<u64>()) {
        let s = random_projective_tree(n, &fuzz_vocab(), seed).unwrap();
        let text = write_conllu(std::slice::from_ref(&s), None).unwrap();
        let back = parse_conllu(&text).unwrap();
        prop_assert_eq!(&back, &vec![s]);
        prop_assert_eq!(write_conllu(&back, None).unwrap(), text);
    }

    #[test]
    fn all_properties_hold(n in 1usize..31, seed in any::<u64>()) {
        let s = random_projective_tree(n, &fuzz_vocab(), seed).unwrap();
        prop_assert!(check_tree(&s, &fuzz_vocab()).is_ok());
    }

    #[test]
    fn swift_is_never_longer_than_eager(n in 1usize..31, seed in any::<u64>()) {
        let vocab = fuzz_vocab();
        let s = random_projective_tree(n, &vocab, seed).unwrap();
        let asw = sentence_oracle(&s, &vocab, OracleVariant::Asw).unwrap();
        let aer = sentence_oracle(&s, &vocab, OracleVariant::AeR).unwrap();
        let expanded = expand_swift_to_eager(&asw).unwrap();
        let reduces = KindCounts::of(&expanded).reduce;
        prop_assert!(asw.len() <= aer.len());
        prop_assert_eq!(asw.len() == aer.len(), reduces == 0);
    }

    #[test]
    fn feasibility_bounds_along_oracle_paths(n in 1usize..31, seed in any::<u64>()) {
        let vocab = fuzz_vocab();
        let s = random_projective_tree(n, &vocab, seed).unwrap();
        for variant in OracleVariant::ALL {
            let system = variant.system();
            let mut state = ParserState::initial(n).unwrap();
            for t in sentence_oracle(&s, &vocab, variant).unwrap() {
                let f = state.feasible(system);
                if system == SystemId::ArcSwift {
                    prop_assert!(f.len() <= state.stack().len() + 2);
                } else {
                    prop_assert!(f.len() <= 4);
                }
                // Feasible sets agree with the precondition checker.
                for a in &f {
                    prop_assert!(state.check(system, *a).is_ok());
                }
                state.apply_mut(system, t).unwrap();
                // No token ever has two heads; the root never gets one.
                prop_assert!(!state.is_attached(0));
            }
        }
    }
}

#[test]
fn projective_tree_counts() {
    let counts: Vec<usize> = (1..=4).map(|n| projective_trees(n).len()).collect();
    assert_eq!(counts, vec![1, 3, 12, 55]);
}

#[test]
fn exhaustive_enumeration_up_to_four() {
    for n in 1..=4 {
        let expected = projective_trees(n);
        for system in SystemId::ALL {
            let found = derivations(n, system);
            let mut trees: Vec<_> = found.keys().cloned().collect();
            trees.sort();
            let mut exp = expected.clone();
            exp.sort();
            assert_eq!(trees, exp, "{system} n={n}");
            if system == SystemId::ArcSwift {
                assert!(found.values().all(|&c| c == 1));
            }
        }
    }
    let eager = derivations(3, SystemId::ArcEager);
    assert!(eager.values().any(|&c| c > 1));
    assert!(check_enumeration(4).is_ok());
}

#[test]
fn non_projective_gold_is_rejected() {
    let vocab = LabelVocab::new(["dep"]);
    let gold = GoldTree::new(vec![0, 3, 0, 2, 2], vec![swiftdep::LabelId(0); 5]);
    for v in OracleVariant::ALL {
        assert!(matches!(
            oracle_sequence(&gold, v),
            Err(swiftdep::OracleError::NonProjective)
        ));
    }
    let _ = vocab;
}

#[test]
fn replay_of_expansion_matches_labeled_arcs() {
    let vocab = fuzz_vocab();
    for seed in 0..200 {
        let s = random_projective_tree(1 + seed as usize % 30, &vocab, seed).unwrap();
        let gold = GoldTree::from_sentence(&s, &vocab).unwrap();
        let asw = oracle_sequence(&gold, OracleVariant::Asw).unwrap();
        let state = replay(
            s.len(),
            SystemId::ArcEager,
            &expand_swift_to_eager(&asw).unwrap(),
        )
        .unwrap();
        assert_eq!(state.arcs(), &gold.arcs());
    }
}
