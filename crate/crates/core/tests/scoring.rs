mod common;

use swiftdep::decode::greedy_parse;
use swiftdep::eval::{evaluate, total};
use swiftdep::oracle::sentence_oracle;
use swiftdep::scoring::{
    adam_step, train, AdamConfig, AdamState, Gradients, Lexicon, ModelDims, Regularization,
    ScorerModel, TrainerConfig,
};
use swiftdep::{punctuation_mask, OracleVariant, ParserState, PunctPolicy, Sentence, SystemId};

fn small_dims() -> ModelDims {
    ModelDims {
        word_dim: 3,
        pos_dim: 2,
        window: 1,
        repr_dim: 4,
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let corpus = common::fixture("en_sample.conllu");
    let lexicon = Lexicon::from_corpus(&corpus);
    let mut covered = std::collections::BTreeMap::new();
    for (k, variant) in [
        OracleVariant::Asw,
        OracleVariant::AeS,
        OracleVariant::Asd,
        OracleVariant::Ah,
        OracleVariant::Asw,
    ]
    .into_iter()
    .enumerate()
    {
        let model = ScorerModel::new(
            variant.system(),
            lexicon.clone(),
            small_dims(),
            100 + k as u64,
        );
        let s = &corpus[k + 2];
        let report = common::gradient_check(&model, s, variant, |_, _| true);
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        for (name, c) in report.nonzero {
            *covered.entry(name).or_insert(0) += c;
        }
    }
    for (name, c) in covered {
        assert!(c > 0, "no gradient ever reached {name}");
    }
}

#[test]
fn loss_is_deterministic_without_noise() {
    let corpus = common::fixture("en_sample.conllu");
    let model = ScorerModel::new(
        SystemId::ArcSwift,
        Lexicon::from_corpus(&corpus),
        small_dims(),
        5,
    );
    let seq = sentence_oracle(&corpus[0], &model.lexicon.labels, OracleVariant::Asw).unwrap();
    let a = model
        .loss_and_gradient(&corpus[0], &seq, SystemId::ArcSwift, None, 1)
        .unwrap();
    let b = model
        .loss_and_gradient(&corpus[0], &seq, SystemId::ArcSwift, None, 2)
        .unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let reg = Some(Regularization {
        dropout: 0.05,
        unk_replace: 0.1,
    });
    let c = model
        .loss_and_gradient(&corpus[0], &seq, SystemId::ArcSwift, reg, 9)
        .unwrap();
    let d = model
        .loss_and_gradient(&corpus[0], &seq, SystemId::ArcSwift, reg, 9)
        .unwrap();
    assert_eq!(c.0, d.0);
}

#[test]
fn probabilities_are_normalised_over_feasible_candidates() {
    let corpus = common::fixture("en_sample.conllu");
    let lexicon = Lexicon::from_corpus(&corpus);
    for variant in OracleVariant::ALL {
        let system = variant.system();
        let model = ScorerModel::new(system, lexicon.clone(), ModelDims::default(), 3);
        for s in &corpus {
            let seq = sentence_oracle(s, &lexicon.labels, variant).unwrap();
            let mut state = ParserState::initial(s.len()).unwrap();
            for t in seq {
                let scores = model.score_transitions(&state, s, system).unwrap();
                let sum: f64 = scores.iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-9);
                let arcs = state.feasible(system).iter().filter(|a| a.is_arc()).count();
                let plain = state.feasible(system).len() - arcs;
                assert_eq!(scores.len(), arcs * lexicon.labels.len() + plain);
                assert!(scores
                    .iter()
                    .all(|(c, _)| state.check(system, c.action()).is_ok()));
                state.apply_mut(system, t).unwrap();
            }
            assert!(matches!(
                model.score_transitions(&state, s, system),
                Err(swiftdep::ModelError::Terminal)
            ));
        }
    }
}

#[test]
fn single_candidate_has_probability_one() {
    // The initial arc-standard state only allows Shift.
    let corpus = common::fixture("en_sample.conllu");
    let model = ScorerModel::new(
        SystemId::ArcStandard,
        Lexicon::from_corpus(&corpus),
        small_dims(),
        1,
    );
    let s = &corpus[11];
    let state = ParserState::initial(s.len()).unwrap();
    let scores = model
        .score_transitions(&state, s, SystemId::ArcStandard)
        .unwrap();
    assert_eq!(scores, vec![(swiftdep::Transition::Shift, 1.0)]);
    let err = model
        .score_transitions(&state, s, SystemId::ArcSwift)
        .unwrap_err();
    assert!(matches!(err, swiftdep::ModelError::SystemMismatch { .. }));
}

#[test]
fn zero_model_is_uniform() {
    let corpus = common::fixture("en_sample.conllu");
    let mut model = ScorerModel::new(
        SystemId::ArcSwift,
        Lexicon::from_corpus(&corpus),
        small_dims(),
        1,
    );
    for (_, t) in model.params.named_mut() {
        t.data.iter_mut().for_each(|x| *x = 0.0);
    }
    let s = &corpus[11];
    let state = ParserState::initial(s.len()).unwrap();
    let scores = model
        .score_transitions(&state, s, SystemId::ArcSwift)
        .unwrap();
    let k = scores.len() as f64;
    assert!(scores.iter().all(|(_, p)| (p - 1.0 / k).abs() < 1e-12));
    // The first oracle step is then worth ln K nats.
    let seq = sentence_oracle(s, &model.lexicon.labels, OracleVariant::Asw).unwrap();
    let (nll, _) = model
        .loss_and_gradient(s, &seq[..1], SystemId::ArcSwift, None, 0)
        .unwrap();
    assert!((nll - k.ln()).abs() < 1e-12);
}

#[test]
fn token_repr_uses_only_the_window() {
    let corpus = common::fixture("en_sample.conllu");
    let model = ScorerModel::new(
        SystemId::ArcSwift,
        Lexicon::from_corpus(&corpus),
        ModelDims::default(),
        4,
    );
    let s = corpus[3].clone(); // ten tokens
    let before = model.token_repr(&s, 2).unwrap();
    let mut changed = s.clone();
    changed.tokens[7].form = "unicycle".into();
    assert_eq!(model.token_repr(&changed, 2).unwrap(), before);
    changed.tokens[3].form = "unicycle".into();
    assert_ne!(model.token_repr(&changed, 2).unwrap(), before);
    assert!(model.token_repr(&s, 11).is_err());
    assert!(model.token_repr(&s, 0).is_ok());
}

#[test]
fn zero_projections_give_zero_representations() {
    let corpus = common::fixture("en_sample.conllu");
    let mut model = ScorerModel::new(
        SystemId::ArcSwift,
        Lexicon::from_corpus(&corpus),
        ModelDims::default(),
        4,
    );
    for t in [
        &mut model.params.layers.head_w,
        &mut model.params.layers.head_b,
        &mut model.params.layers.dep_w,
        &mut model.params.layers.dep_b,
    ] {
        t.data.iter_mut().for_each(|x| *x = 0.0);
    }
    let r = model.token_repr(&corpus[0], 3).unwrap();
    assert!(r.head.iter().chain(&r.dep).all(|&x| x == 0.0));
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let corpus = common::fixture("two_sentences.conllu");
    let model = ScorerModel::new(
        SystemId::ArcSwift,
        Lexicon::from_corpus(&corpus),
        small_dims(),
        1,
    );
    let mut params = model.params.clone();
    let mut grads = Gradients::zeros_like(&params);
    grads.layers.shift_u.data[0] = 0.2;
    let mut st = AdamState::new(&params);
    adam_step(&mut params, &grads, &mut st, &AdamConfig::default(), 0.001).unwrap();
    let delta = params.layers.shift_u.data[0] - model.params.layers.shift_u.data[0];
    assert!((delta + 0.001).abs() < 1e-10, "{delta}");
    assert_eq!(st.t, 1);
    // Everything with zero gradient is untouched.
    assert_eq!(params.layers.head_w, model.params.layers.head_w);
    assert_eq!(params.word_emb, model.params.word_emb);

    let mut bad = Gradients::zeros_like(&params);
    bad.layers.cls_b.data[0] = f64::NAN;
    let err = adam_step(&mut params, &bad, &mut st, &AdamConfig::default(), 0.001).unwrap_err();
    assert!(err.to_string().contains("cls_b"));
}

fn overfit_config() -> TrainerConfig {
    TrainerConfig {
        epochs: 200,
        lr0: 0.005,
        batch_size: 1,
        anneal_after: 200,
        dropout: 0.0,
        unk_replace: 0.0,
        seed: 3,
        ..TrainerConfig::default()
    }
}

fn accuracy(model: &ScorerModel, corpus: &[Sentence]) -> (f64, f64) {
    let counts: Vec<_> = corpus
        .iter()
        .map(|s| {
            let out = greedy_parse(s, model).unwrap();
            let pred = out.arcs.to_prediction(&model.lexicon.labels);
            evaluate(&pred, s, &punctuation_mask(s, PunctPolicy::Label)).unwrap()
        })
        .collect();
    let t = total(&counts);
    (t.uas(), t.las())
}

#[test]
fn training_is_deterministic_and_nll_decreases() {
    let corpus = common::fixture("en_sample.conllu");
    let cfg = TrainerConfig {
        epochs: 6,
        dims: small_dims(),
        ..TrainerConfig::default()
    };
    let a = train(&corpus, OracleVariant::Asw, &cfg).unwrap();
    let b = train(&corpus, OracleVariant::Asw, &cfg).unwrap();
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.trace, b.trace);
    assert!(a.trace.iter().all(|e| e.mean_nll.is_finite()));
    assert!(a.trace.last().unwrap().mean_nll < a.trace[0].mean_nll);
}

#[test]
fn overfits_one_sentence() {
    let corpus = common::fixture("en_sample.conllu");
    let one = vec![corpus[4].clone()];
    let cfg = TrainerConfig {
        epochs: 60,
        ..overfit_config()
    };
    let out = train(&one, OracleVariant::Asw, &cfg).unwrap();
    let pred = greedy_parse(&one[0], &out.model).unwrap();
    assert_eq!(pred.arcs.heads(), one[0].heads());
}

#[test]
fn overfits_ten_sentences_for_every_system() {
    let corpus: Vec<Sentence> = common::fixture("en_sample.conllu")
        .into_iter()
        .take(10)
        .collect();
    for variant in [
        OracleVariant::Asd,
        OracleVariant::AeS,
        OracleVariant::Ah,
        OracleVariant::Asw,
    ] {
        let out = train(&corpus, variant, &overfit_config()).unwrap();
        let (uas, las) = accuracy(&out.model, &corpus);
        assert_eq!((uas, las), (100.0, 100.0), "{variant}");
    }
}
