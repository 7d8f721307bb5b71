mod common;

use swiftdep::{
    is_projective, parse_conllu, punctuation_mask, write_conllu, Prediction, PunctPolicy,
};

#[test]
fn fixtures_round_trip_byte_exactly() {
    for name in [
        "en_sample.conllu",
        "two_sentences.conllu",
        "with_nonprojective.conllu",
    ] {
        let text = std::fs::read_to_string(common::data_path(name)).unwrap();
        let corpus = parse_conllu(&text).unwrap();
        assert_eq!(write_conllu(&corpus, None).unwrap(), text, "{name}");
        let blocks = text.split("\n\n").filter(|b| !b.trim().is_empty()).count();
        assert_eq!(corpus.len(), blocks);
    }
}

#[test]
fn predicted_columns_are_written() {
    let corpus = common::fixture("two_sentences.conllu");
    let preds: Vec<Prediction> = corpus
        .iter()
        .map(|s| Prediction {
            heads: vec![0; s.len()],
            labels: vec!["dep".into(); s.len()],
        })
        .collect();
    let text = write_conllu(&corpus, Some(&preds)).unwrap();
    let back = parse_conllu(&text).unwrap();
    assert!(back
        .iter()
        .flat_map(|s| &s.tokens)
        .all(|t| t.head == 0 && t.deprel == "dep"));
    assert!(write_conllu(&corpus, Some(&preds[..1])).is_err());
}

#[test]
fn nonprojective_fixture_is_detected() {
    let corpus = common::fixture("with_nonprojective.conllu");
    let flags: Vec<bool> = corpus.iter().map(is_projective).collect();
    assert_eq!(flags, vec![true, false]);
}

#[test]
fn punct_mask_matches_label_count() {
    let corpus = common::fixture("en_sample.conllu");
    let masked: usize = corpus
        .iter()
        .map(|s| {
            punctuation_mask(s, PunctPolicy::Label)
                .iter()
                .filter(|&&m| m)
                .count()
        })
        .sum();
    let text = std::fs::read_to_string(common::data_path("en_sample.conllu")).unwrap();
    let counted = text
        .lines()
        .filter(|l| l.split('\t').nth(7) == Some("punct"))
        .count();
    assert_eq!(masked, counted);
    let xpos: usize = corpus
        .iter()
        .map(|s| {
            punctuation_mask(s, PunctPolicy::Xpos)
                .iter()
                .filter(|&&m| m)
                .count()
        })
        .sum();
    assert_eq!(xpos, counted);
}
