#![allow(dead_code)]

use std::path::PathBuf;

use swiftdep::{parse_conllu, Sentence};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn fixture(name: &str) -> Vec<Sentence> {
    let text = std::fs::read_to_string(data_path(name)).expect("fixture exists");
    parse_conllu(&text).expect("fixture parses")
}

/// Sentence lengths as a quick identity check on fixtures.
pub fn lengths(corpus: &[Sentence]) -> Vec<usize> {
    corpus.iter().map(Sentence::len).collect()
}

use swiftdep::oracle::sentence_oracle;
use swiftdep::scoring::{Gradients, Layers, ScorerModel, Tensor};
use swiftdep::OracleVariant;

pub fn loss(model: &ScorerModel, s: &Sentence, variant: OracleVariant) -> f64 {
    let seq = sentence_oracle(s, &model.lexicon.labels, variant).unwrap();
    model
        .loss_and_gradient(s, &seq, variant.system(), None, 0)
        .unwrap()
        .0
}

pub fn dense_gradients(model: &ScorerModel, g: &Gradients) -> Vec<(&'static str, Tensor)> {
    let mut out = vec![
        (
            "word_emb",
            Gradients::dense_rows(&g.word_rows, &model.params.word_emb),
        ),
        (
            "pos_emb",
            Gradients::dense_rows(&g.pos_rows, &model.params.pos_emb),
        ),
    ];
    out.extend(
        Layers::NAMES
            .into_iter()
            .zip(g.layers.tensors().into_iter().cloned()),
    );
    out
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Worst relative error over coordinates with magnitude >= 1e-5.
    pub worst_rel: f64,
    /// Worst absolute gap over smaller coordinates.
    pub worst_abs_small: f64,
    pub failures: Vec<String>,
    /// Non-zero analytic coordinates per tensor.
    pub nonzero: Vec<(&'static str, usize)>,
}

/// Compares analytic gradients with central differences (h = 1e-5).
/// `keep(tensor, coordinate)` selects which coordinates to probe.
pub fn gradient_check(
    model: &ScorerModel,
    s: &Sentence,
    variant: OracleVariant,
    mut keep: impl FnMut(usize, usize) -> bool,
) -> GradCheck {
    let h = 1e-5;
    let seq = sentence_oracle(s, &model.lexicon.labels, variant).unwrap();
    let (_, g) = model
        .loss_and_gradient(s, &seq, variant.system(), None, 0)
        .unwrap();
    let analytic = dense_gradients(model, &g);
    let mut report = GradCheck::default();
    let mut probe = model.clone();
    for (t_idx, (name, grad)) in analytic.iter().enumerate() {
        report
            .nonzero
            .push((*name, grad.data.iter().filter(|&&x| x != 0.0).count()));
        for i in 0..grad.data.len() {
            if !keep(t_idx, i) {
                continue;
            }
            let original = probe.params.named()[t_idx].1.data[i];
            probe.params.named_mut()[t_idx].1.data[i] = original + h;
            let up = loss(&probe, s, variant);
            probe.params.named_mut()[t_idx].1.data[i] = original - h;
            let down = loss(&probe, s, variant);
            probe.params.named_mut()[t_idx].1.data[i] = original;
            let numeric = (up - down) / (2.0 * h);
            let a = grad.data[i];
            report.checked += 1;
            let scale = a.abs().max(numeric.abs());
            // Below 1e-5 the difference quotient is dominated by rounding
            // noise (about 1e-10 absolute), so only the absolute gap is checked.
            if scale < 1e-5 {
                let gap = (a - numeric).abs();
                report.worst_abs_small = report.worst_abs_small.max(gap);
                if gap >= 1e-8 {
                    report
                        .failures
                        .push(format!("{name}[{i}]: analytic {a} vs numeric {numeric}"));
                }
                continue;
            }
            let rel = (a - numeric).abs() / scale;
            report.worst_rel = report.worst_rel.max(rel);
            if rel >= 1e-4 {
                report.failures.push(format!(
                    "{name}[{i}]: analytic {a} vs numeric {numeric} ({variant})"
                ));
            }
        }
    }
    report
}
