mod common;

use swiftdep::decode::{beam_parse, greedy_parse, BeamNorm};
use swiftdep::eval::{
    bin_errors_by_length, evaluate, evaluate_corpus, holm_adjust, paired_bootstrap, total,
    EvalCounts,
};
use swiftdep::oracle::KindCounts;
use swiftdep::scoring::{Lexicon, ModelDims, ScorerModel};
use swiftdep::{punctuation_mask, Prediction, PunctPolicy, Sentence, SystemId};

fn models(corpus: &[Sentence]) -> Vec<ScorerModel> {
    let lexicon = Lexicon::from_corpus(corpus);
    SystemId::ALL
        .iter()
        .enumerate()
        .map(|(i, &s)| ScorerModel::new(s, lexicon.clone(), ModelDims::default(), 40 + i as u64))
        .collect()
}

fn masks(corpus: &[Sentence]) -> Vec<Vec<bool>> {
    corpus
        .iter()
        .map(|s| punctuation_mask(s, PunctPolicy::Label))
        .collect()
}

#[test]
fn greedy_yields_well_formed_trees() {
    let corpus = common::fixture("en_sample.conllu");
    for model in models(&corpus) {
        for s in &corpus {
            let out = greedy_parse(s, &model).unwrap();
            assert_eq!(out.arcs.len(), s.len(), "{}", model.system);
            let heads = out.arcs.heads();
            assert!((1..=s.len()).all(|d| heads[d] <= s.len() && heads[d] != d));
            assert_eq!(out.trace.len(), out.transitions.len());
            if model.system == SystemId::ArcSwift {
                let k = KindCounts::of(&out.transitions);
                // Finalisation only adds root arcs; the sequence itself obeys
                // the length identity over the tokens it attached.
                assert_eq!(out.transitions.len(), 2 * s.len() - k.right - out.fallback);
            }
        }
    }
}

#[test]
fn beam_of_one_is_greedy() {
    let corpus = common::fixture("en_sample.conllu");
    for model in models(&corpus) {
        for s in &corpus {
            let g = greedy_parse(s, &model).unwrap();
            for norm in [BeamNorm::None, BeamNorm::Length] {
                let b = beam_parse(s, &model, 1, norm).unwrap();
                assert_eq!(b.transitions, g.transitions);
                assert_eq!(b.arcs, g.arcs);
                assert_eq!(b.trace, g.trace);
            }
        }
    }
}

#[test]
fn wider_beams_find_paths_at_least_as_likely_on_fixture() {
    let corpus = common::fixture("en_sample.conllu");
    let mut dominated = 0;
    let mut cases = 0;
    for model in models(&corpus) {
        for s in &corpus {
            let g = greedy_parse(s, &model).unwrap();
            let b = beam_parse(s, &model, 4, BeamNorm::Length).unwrap();
            cases += 1;
            let gn = BeamNorm::Length.score(g.logprob, g.transitions.len());
            let bn = BeamNorm::Length.score(b.logprob, b.transitions.len());
            if bn >= gn - 1e-12 {
                dominated += 1;
            }
            assert!(b.total_skeletons() >= g.total_skeletons());
        }
    }
    // Beam search is not exact, so dominance is checked as a majority property.
    assert!(dominated * 10 >= cases * 9, "{dominated}/{cases}");
}

#[test]
fn beam_candidate_accounting_sums_live_items() {
    let corpus = common::fixture("en_sample.conllu");
    let model = &models(&corpus)[1];
    assert_eq!(model.system, SystemId::ArcEager);
    let (mut greedy, mut beam) = (0, 0);
    for s in &corpus {
        greedy += greedy_parse(s, model).unwrap().total_skeletons();
        beam += beam_parse(s, model, 2, BeamNorm::Length)
            .unwrap()
            .total_skeletons();
    }
    let ratio = beam as f64 / greedy as f64;
    assert!(ratio > 1.5 && ratio < 2.5, "{ratio}");
}

#[test]
fn perfect_and_partial_scores() {
    let corpus = common::fixture("en_sample.conllu");
    let preds: Vec<Prediction> = corpus.iter().map(Prediction::from_gold).collect();
    let counts = evaluate_corpus(&preds, &corpus, &masks(&corpus)).unwrap();
    let t = total(&counts);
    assert_eq!((t.uas(), t.las()), (100.0, 100.0));
    let punct: usize = corpus
        .iter()
        .flat_map(|s| &s.tokens)
        .filter(|t| t.deprel == "punct")
        .count();
    let all: usize = corpus.iter().map(Sentence::len).sum();
    assert_eq!(t.tokens, all - punct);
}

#[test]
fn bins_aggregate_to_uas() {
    let corpus = common::fixture("en_sample.conllu");
    let model = &models(&corpus)[3];
    let mut all = EvalCounts::default();
    let mut errors = 0;
    let mut tokens = 0;
    for s in &corpus {
        let pred = greedy_parse(s, model)
            .unwrap()
            .arcs
            .to_prediction(&model.lexicon.labels);
        let mask = punctuation_mask(s, PunctPolicy::Label);
        all.add(&evaluate(&pred, s, &mask).unwrap());
        for b in bin_errors_by_length(&pred, s, &mask).unwrap() {
            errors += b.errors;
            tokens += b.tokens;
        }
    }
    assert!(all.las() <= all.uas());
    let from_bins = 100.0 * errors as f64 / tokens as f64;
    assert!((from_bins - (100.0 - all.uas())).abs() < 1e-9);
}

fn synthetic_counts(correct: bool, n: usize) -> Vec<EvalCounts> {
    (0..n)
        .map(|_| EvalCounts {
            sentences: 1,
            tokens: 5,
            correct_heads: if correct { 5 } else { 0 },
            correct_labeled: if correct { 5 } else { 0 },
            ..EvalCounts::default()
        })
        .collect()
}

#[test]
fn bootstrap_extremes() {
    let a = synthetic_counts(true, 100);
    let b = synthetic_counts(false, 100);
    let r = paired_bootstrap(&a, &b, 10_000, 1).unwrap();
    assert!(r.uas <= 0.001 && r.las <= 0.001);
    let same = paired_bootstrap(&a, &a, 2_000, 1).unwrap();
    assert_eq!(same.uas, 1.0);
    assert!(paired_bootstrap(&a, &b[..99], 10, 1).is_err());
}

#[test]
fn bootstrap_is_roughly_antisymmetric() {
    // Mixed corpus: A wins on 60 sentences, B on 40.
    let mk = |wins: &[bool]| -> Vec<EvalCounts> {
        wins.iter()
            .map(|&w| EvalCounts {
                sentences: 1,
                tokens: 4,
                correct_heads: if w { 4 } else { 2 },
                correct_labeled: if w { 3 } else { 2 },
                ..EvalCounts::default()
            })
            .collect()
    };
    let pattern: Vec<bool> = (0..100).map(|i| i % 5 != 0 && i % 7 != 0).collect();
    let a = mk(&pattern);
    let b = mk(&pattern.iter().map(|w| !w).collect::<Vec<_>>());
    let ab = paired_bootstrap(&a, &b, 5_000, 9).unwrap();
    let ba = paired_bootstrap(&b, &a, 5_000, 9).unwrap();
    assert!(
        (ab.uas + ba.uas - 1.0).abs() < 0.01,
        "{} {}",
        ab.uas,
        ba.uas
    );
    let again = paired_bootstrap(&a, &b, 5_000, 9).unwrap();
    assert_eq!(ab, again);
}

#[test]
fn holm_ten_groups() {
    let adj = holm_adjust(&[0.004; 10]).unwrap();
    assert!(adj.iter().all(|&p| (p - 0.04).abs() < 1e-12));
    let adj = holm_adjust(&[0.04, 0.01]).unwrap();
    assert!((adj[0] - 0.04).abs() < 1e-15 && (adj[1] - 0.02).abs() < 1e-15);
}
