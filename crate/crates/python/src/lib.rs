//! Python bindings: CoNLL-U sentences, oracles, training, decoding,
//! evaluation and significance testing.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use swiftdep::config::set_trainer_key;
use swiftdep::decode::{beam_parse, greedy_parse, BeamNorm};
use swiftdep::eval::{evaluate_corpus, total, EvalCounts};
use swiftdep::scoring::{load_model, save_model, train, ScorerModel, TrainerConfig};
use swiftdep::stats::candidate_count_report;
use swiftdep::transition::replay;
use swiftdep::{
    expand_swift_to_eager, is_projective, oracle_sequence, parse_conllu, punctuation_mask,
    write_conllu, GoldTree, LabelVocab, OracleVariant, Prediction, PunctPolicy, SystemId,
    Transition,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_arg<T: std::str::FromStr>(v: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(value_err)
}

/// One CoNLL-U sentence.
#[pyclass(name = "Sentence", module = "swiftdep", from_py_object)]
#[derive(Clone)]
struct PySentence {
    inner: swiftdep::Sentence,
}

#[pymethods]
impl PySentence {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn forms(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.form.clone()).collect()
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.inner
            .tokens
            .iter()
            .map(|t| t.pos().to_string())
            .collect()
    }

    /// Head of every token; 0 is the root.
    #[getter]
    fn heads(&self) -> Vec<usize> {
        self.inner.tokens.iter().map(|t| t.head).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.deprel.clone()).collect()
    }

    #[getter]
    fn sent_id(&self) -> Option<String> {
        self.inner.sent_id().map(str::to_string)
    }

    fn is_projective(&self) -> bool {
        is_projective(&self.inner)
    }

    fn to_conllu(&self) -> PyResult<String> {
        write_conllu(std::slice::from_ref(&self.inner), None).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Sentence({} tokens)", self.inner.len())
    }
}

fn unwrap(sentences: &[PySentence]) -> Vec<swiftdep::Sentence> {
    sentences.iter().map(|s| s.inner.clone()).collect()
}

/// Label vocabulary covering every label written inside `(...)` in `seq`.
fn vocab_of(seq: &[String]) -> LabelVocab {
    LabelVocab::new(seq.iter().filter_map(|t| {
        let open = t.find('(')?;
        t[open + 1..].strip_suffix(')').map(str::to_string)
    }))
}

fn parse_seq(seq: &[String], vocab: &LabelVocab) -> PyResult<Vec<Transition>> {
    seq.iter()
        .map(|t| Transition::parse(t, vocab).map_err(value_err))
        .collect()
}

/// Parses CoNLL-U text into sentences.
#[pyfunction]
fn read_conllu(text: &str) -> PyResult<Vec<PySentence>> {
    Ok(parse_conllu(text)
        .map_err(value_err)?
        .into_iter()
        .map(|inner| PySentence { inner })
        .collect())
}

/// Writes sentences back to CoNLL-U text.
#[pyfunction]
fn to_conllu(sentences: Vec<PySentence>) -> PyResult<String> {
    write_conllu(&unwrap(&sentences), None).map_err(value_err)
}

/// Static-oracle transitions for a projective sentence.
/// `variant` is one of asd, aeS, aeR, ah, asw.
#[pyfunction]
#[pyo3(signature = (sentence, variant = "asw"))]
fn oracle(sentence: &PySentence, variant: &str) -> PyResult<Vec<String>> {
    let variant: OracleVariant = parse_arg(variant)?;
    let vocab = LabelVocab::from_corpus(std::slice::from_ref(&sentence.inner));
    let gold = GoldTree::from_sentence(&sentence.inner, &vocab).map_err(value_err)?;
    let seq = oracle_sequence(&gold, variant).map_err(value_err)?;
    Ok(seq.iter().map(|t| t.render(&vocab)).collect())
}

/// Rewrites an arc-swift sequence as the equivalent arc-eager sequence.
#[pyfunction]
fn expand_swift(seq: Vec<String>) -> PyResult<Vec<String>> {
    let vocab = vocab_of(&seq);
    let expanded = expand_swift_to_eager(&parse_seq(&seq, &vocab)?).map_err(value_err)?;
    Ok(expanded.iter().map(|t| t.render(&vocab)).collect())
}

/// Unlabeled transitions feasible after applying `prefix` to a sentence of
/// `n` tokens, in canonical order.
#[pyfunction]
#[pyo3(signature = (n, system, prefix = Vec::new()))]
fn feasible(n: usize, system: &str, prefix: Vec<String>) -> PyResult<Vec<String>> {
    let system: SystemId = parse_arg(system)?;
    let vocab = vocab_of(&prefix);
    let state = replay(n, system, &parse_seq(&prefix, &vocab)?).map_err(value_err)?;
    Ok(state
        .feasible(system)
        .iter()
        .map(|a| a.to_string())
        .collect())
}

/// `(head, dependent, label)`.
type LabeledArc = (usize, usize, String);

/// Replays `seq`; returns whether the final state is terminal and its arcs
/// as `(head, dependent, label)`.
#[pyfunction]
#[pyo3(signature = (n, system, seq))]
fn replay_arcs(n: usize, system: &str, seq: Vec<String>) -> PyResult<(bool, Vec<LabeledArc>)> {
    let system: SystemId = parse_arg(system)?;
    let vocab = vocab_of(&seq);
    let state = replay(n, system, &parse_seq(&seq, &vocab)?).map_err(value_err)?;
    let arcs = state
        .arcs()
        .iter()
        .map(|(h, d, l)| (h, d, vocab.label(l).to_string()))
        .collect();
    Ok((state.is_terminal(system), arcs))
}

fn counts(gold: &[PySentence], pred: &[PySentence], punct: &str) -> PyResult<Vec<EvalCounts>> {
    let punct: PunctPolicy = parse_arg(punct)?;
    let gold = unwrap(gold);
    let preds: Vec<Prediction> = pred
        .iter()
        .map(|s| Prediction::from_gold(&s.inner))
        .collect();
    let masks: Vec<Vec<bool>> = gold.iter().map(|s| punctuation_mask(s, punct)).collect();
    evaluate_corpus(&preds, &gold, &masks).map_err(value_err)
}

/// Micro-averaged scores of `pred` against `gold`: a dict with uas, las,
/// tokens, multi_root and per-length-bin head error rates.
#[pyfunction]
#[pyo3(signature = (gold, pred, punct = "label"))]
fn evaluate<'py>(
    py: Python<'py>,
    gold: Vec<PySentence>,
    pred: Vec<PySentence>,
    punct: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let t = total(&counts(&gold, &pred, punct)?);
    let out = PyDict::new(py);
    out.set_item("uas", t.uas())?;
    out.set_item("las", t.las())?;
    out.set_item("tokens", t.tokens)?;
    out.set_item("sentences", t.sentences)?;
    out.set_item("multi_root", t.multi_root)?;
    out.set_item(
        "bin_error_rates",
        t.bins.iter().map(|b| b.error_rate()).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// One-sided paired bootstrap p-values `(uas, las)` for "A beats B".
#[pyfunction]
#[pyo3(signature = (gold, pred_a, pred_b, samples = 10_000, seed = 1))]
fn paired_bootstrap(
    gold: Vec<PySentence>,
    pred_a: Vec<PySentence>,
    pred_b: Vec<PySentence>,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let a = counts(&gold, &pred_a, "label")?;
    let b = counts(&gold, &pred_b, "label")?;
    let r = swiftdep::eval::paired_bootstrap(&a, &b, samples, seed).map_err(value_err)?;
    Ok((r.uas, r.las))
}

/// Holm step-down adjusted p-values, in input order.
#[pyfunction]
fn holm_adjust(pvalues: Vec<f64>) -> PyResult<Vec<f64>> {
    swiftdep::eval::holm_adjust(&pvalues).map_err(value_err)
}

/// Oracle length and candidate statistics of projective sentences, as JSON.
#[pyfunction]
fn efficiency_report_json(sentences: Vec<PySentence>) -> PyResult<String> {
    let corpus = unwrap(&sentences);
    let vocab = LabelVocab::from_corpus(&corpus);
    let report = candidate_count_report(&corpus, &vocab, &OracleVariant::ALL).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

/// A trained transition scorer.
#[pyclass(name = "Model", module = "swiftdep")]
struct PyModel {
    inner: ScorerModel,
}

#[pymethods]
impl PyModel {
    /// Trains on the projective sentences of `sentences`. `variant` picks the
    /// oracle (asd, aeS, aeR, ah, asw); keyword options are trainer keys such
    /// as epochs, lr, batch_size, dropout, seed.
    #[staticmethod]
    #[pyo3(signature = (sentences, variant = "asw", **options))]
    fn train(
        py: Python<'_>,
        sentences: Vec<PySentence>,
        variant: &str,
        options: Option<HashMap<String, Py<PyAny>>>,
    ) -> PyResult<Self> {
        let variant: OracleVariant = parse_arg(variant)?;
        let mut cfg = TrainerConfig::ud_schedule();
        for (k, v) in options.unwrap_or_default() {
            let text = v.bind(py).str()?.to_string();
            if !set_trainer_key(&mut cfg, &k, &text).map_err(value_err)? {
                return Err(value_err(format!("unknown trainer option {k:?}")));
            }
        }
        let corpus: Vec<_> = unwrap(&sentences)
            .into_iter()
            .filter(is_projective)
            .collect();
        let outcome = py
            .detach(|| train(&corpus, variant, &cfg))
            .map_err(value_err)?;
        Ok(PyModel {
            inner: outcome.model,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_model(&path)
            .map(|inner| PyModel { inner })
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn system(&self) -> String {
        self.inner.system.short_name().to_string()
    }

    /// Parses sentences, returning copies with predicted heads and labels.
    #[pyo3(signature = (sentences, beam = 1, beam_norm = "length"))]
    fn parse(
        &self,
        py: Python<'_>,
        sentences: Vec<PySentence>,
        beam: usize,
        beam_norm: &str,
    ) -> PyResult<Vec<PySentence>> {
        let norm: BeamNorm = parse_arg(beam_norm)?;
        let corpus = unwrap(&sentences);
        let model = &self.inner;
        py.detach(|| {
            corpus
                .into_iter()
                .map(|mut s| {
                    let out = if beam <= 1 {
                        greedy_parse(&s, model)
                    } else {
                        beam_parse(&s, model, beam, norm)
                    }?;
                    let pred = out.arcs.to_prediction(&model.lexicon.labels);
                    for (t, (h, l)) in s
                        .tokens
                        .iter_mut()
                        .zip(pred.heads.into_iter().zip(pred.labels))
                    {
                        t.head = h;
                        t.deprel = l;
                    }
                    Ok(PySentence { inner: s })
                })
                .collect::<Result<Vec<_>, swiftdep::ModelError>>()
        })
        .map_err(value_err)
    }
}

#[pymodule]
#[pyo3(name = "swiftdep")]
fn swiftdep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySentence>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(to_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(expand_swift, m)?)?;
    m.add_function(wrap_pyfunction!(feasible, m)?)?;
    m.add_function(wrap_pyfunction!(replay_arcs, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(paired_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(holm_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_report_json, m)?)?;
    Ok(())
}
