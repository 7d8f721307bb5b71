//! Corpus statistics over oracle transition sequences: sequence lengths,
//! feasible-candidate counts and how candidate evaluations scale with
//! sentence length.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{EvalError, OracleError};
use crate::oracle::{expand_swift_to_eager, oracle_sequence, GoldTree, KindCounts, OracleVariant};
use crate::transition::{Action, ParserState, SystemId, Transition};
use crate::treebank::{sentence_from_heads, LabelVocab, Sentence};

/// Oracle statistics of one sentence under one variant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SequenceRow {
    pub n: usize,
    pub length: usize,
    pub shifts: usize,
    pub reduces: usize,
    pub left_arcs: usize,
    pub right_arcs: usize,
    /// Feasible unlabeled transitions summed over the states along the sequence.
    pub skeletons: usize,
    /// Feasible labeled transitions summed over the same states.
    pub labeled: usize,
}

/// Replays `seq` counting feasible transitions at every state before a step.
pub fn replay_counts(
    n: usize,
    system: SystemId,
    seq: &[Transition],
    labels: usize,
) -> Result<(usize, usize), OracleError> {
    let mut state = ParserState::initial(n)?;
    let (mut skeletons, mut labeled) = (0, 0);
    for &t in seq {
        let feasible = state.feasible(system);
        skeletons += feasible.len();
        labeled += feasible
            .iter()
            .map(|a| if a.is_arc() { labels } else { 1 })
            .sum::<usize>();
        state.apply_mut(system, t)?;
    }
    Ok((skeletons, labeled))
}

fn row(gold: &GoldTree, variant: OracleVariant, labels: usize) -> Result<SequenceRow, OracleError> {
    let seq = oracle_sequence(gold, variant)?;
    let k = KindCounts::of(&seq);
    let (skeletons, labeled) = replay_counts(gold.n(), variant.system(), &seq, labels)?;
    Ok(SequenceRow {
        n: gold.n(),
        length: seq.len(),
        shifts: k.shift,
        reduces: k.reduce,
        left_arcs: k.left,
        right_arcs: k.right,
        skeletons,
        labeled,
    })
}

/// Per-variant rows for every sentence, in corpus order.
#[derive(Clone, Debug)]
pub struct CorpusStats {
    pub variants: Vec<OracleVariant>,
    /// `rows[v][s]` is sentence `s` under `variants[v]`.
    pub rows: Vec<Vec<SequenceRow>>,
    /// Reduces produced by expanding each arc-swift sequence into arc-eager.
    pub expanded_reduces: Vec<usize>,
    pub sentences: usize,
    pub tokens: usize,
}

/// Oracle sequences of every variant for every sentence. Sentences are
/// processed in parallel on the current rayon pool; output order is the
/// corpus order.
pub fn corpus_stats(
    corpus: &[Sentence],
    vocab: &LabelVocab,
    variants: &[OracleVariant],
) -> Result<CorpusStats, OracleError> {
    let golds: Vec<GoldTree> = corpus
        .iter()
        .map(|s| GoldTree::from_sentence(s, vocab))
        .collect::<Result<_, _>>()?;
    let labels = vocab.len().max(1);
    let rows = variants
        .iter()
        .map(|&v| {
            golds
                .par_iter()
                .map(|g| row(g, v, labels))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let expanded_reduces = golds
        .par_iter()
        .map(|g| {
            let seq = oracle_sequence(g, OracleVariant::Asw)?;
            Ok(KindCounts::of(&expand_swift_to_eager(&seq)?).reduce)
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    Ok(CorpusStats {
        variants: variants.to_vec(),
        rows,
        expanded_reduces,
        sentences: corpus.len(),
        tokens: golds.iter().map(|g| g.n()).sum(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub mean_length: f64,
    /// Mean feasible unlabeled transitions per step.
    pub per_step_skeletons: f64,
    pub per_step_labeled: f64,
    /// Mean feasible unlabeled transitions per sentence.
    pub per_sentence_skeletons: f64,
    pub per_sentence_labeled: f64,
    pub max_step_skeletons: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub sentences: usize,
    pub tokens: usize,
    pub variants: Vec<VariantSummary>,
    /// Mean arc-swift length over mean length of each arc-eager variant.
    pub length_ratio_vs_aes: Option<f64>,
    pub length_ratio_vs_aer: Option<f64>,
    /// Per-step unlabeled (and labeled) candidate ratio, arc-swift over arc-eager (aeS).
    pub candidate_ratio: Option<f64>,
    pub candidate_ratio_labeled: Option<f64>,
}

impl CorpusStats {
    fn index(&self, v: OracleVariant) -> Option<usize> {
        self.variants.iter().position(|&x| x == v)
    }

    /// Largest feasible-set size met along any oracle path of `variant`.
    pub fn max_step_skeletons(
        &self,
        corpus: &[Sentence],
        vocab: &LabelVocab,
        variant: OracleVariant,
    ) -> Result<usize, OracleError> {
        let system = variant.system();
        corpus
            .par_iter()
            .map(|s| {
                let seq = oracle_sequence(&GoldTree::from_sentence(s, vocab)?, variant)?;
                let mut state = ParserState::initial(s.len())?;
                let mut max = 0;
                for t in seq {
                    max = max.max(state.feasible(system).len());
                    state.apply_mut(system, t)?;
                }
                Ok(max)
            })
            .try_reduce(|| 0, |a, b| Ok(a.max(b)))
    }

    pub fn report(&self) -> EfficiencyReport {
        let summaries: Vec<VariantSummary> = self
            .variants
            .iter()
            .zip(&self.rows)
            .map(|(v, rows)| {
                let sents = rows.len().max(1) as f64;
                let steps: usize = rows.iter().map(|r| r.length).sum();
                let sk: usize = rows.iter().map(|r| r.skeletons).sum();
                let lab: usize = rows.iter().map(|r| r.labeled).sum();
                VariantSummary {
                    variant: v.name().to_string(),
                    mean_length: steps as f64 / sents,
                    per_step_skeletons: sk as f64 / steps.max(1) as f64,
                    per_step_labeled: lab as f64 / steps.max(1) as f64,
                    per_sentence_skeletons: sk as f64 / sents,
                    per_sentence_labeled: lab as f64 / sents,
                    max_step_skeletons: 0,
                }
            })
            .collect();
        let get = |v| self.index(v).map(|i| &summaries[i]);
        let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let asw = get(OracleVariant::Asw);
        let aes = get(OracleVariant::AeS);
        let aer = get(OracleVariant::AeR);
        EfficiencyReport {
            sentences: self.sentences,
            tokens: self.tokens,
            length_ratio_vs_aes: ratio(asw.map(|s| s.mean_length), aes.map(|s| s.mean_length)),
            length_ratio_vs_aer: ratio(asw.map(|s| s.mean_length), aer.map(|s| s.mean_length)),
            candidate_ratio: ratio(
                asw.map(|s| s.per_step_skeletons),
                aes.or(aer).map(|s| s.per_step_skeletons),
            ),
            candidate_ratio_labeled: ratio(
                asw.map(|s| s.per_step_labeled),
                aes.or(aer).map(|s| s.per_step_labeled),
            ),
            variants: summaries,
        }
    }

    /// Checks the sequence-length identities on every sentence, returning the
    /// 1-based index of the first sentence that violates one.
    pub fn check_length_identities(&self) -> Result<(), String> {
        if let Some(i) = self.index(OracleVariant::Asw) {
            for (s, r) in self.rows[i].iter().enumerate() {
                if r.length != 2 * r.n - r.right_arcs {
                    return Err(format!(
                        "sentence {}: asw length {} != 2n - #RArc",
                        s + 1,
                        r.length
                    ));
                }
                if let Some(j) = self.index(OracleVariant::AeR) {
                    let aer = &self.rows[j][s];
                    if r.length + self.expanded_reduces[s] != aer.length {
                        return Err(format!(
                            "sentence {}: asw length {} != aeR length {} - {} expanded reduces",
                            s + 1,
                            r.length,
                            aer.length,
                            self.expanded_reduces[s]
                        ));
                    }
                }
            }
        }
        for v in [OracleVariant::AeS, OracleVariant::AeR] {
            let Some(i) = self.index(v) else { continue };
            for (s, r) in self.rows[i].iter().enumerate() {
                if r.length != 2 * r.n - r.right_arcs + r.reduces {
                    return Err(format!(
                        "sentence {}: {v} length {} != 2n - #RArc + #Reduce",
                        s + 1,
                        r.length
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mean lengths and length ratios of oracle sequences.
pub fn sequence_length_report(
    corpus: &[Sentence],
    vocab: &LabelVocab,
    variants: &[OracleVariant],
) -> Result<EfficiencyReport, OracleError> {
    Ok(corpus_stats(corpus, vocab, variants)?.report())
}

/// Feasible-candidate counts along oracle paths, with per-variant maxima.
pub fn candidate_count_report(
    corpus: &[Sentence],
    vocab: &LabelVocab,
    variants: &[OracleVariant],
) -> Result<EfficiencyReport, OracleError> {
    let stats = corpus_stats(corpus, vocab, variants)?;
    let mut report = stats.report();
    for (summary, &v) in report.variants.iter_mut().zip(variants) {
        summary.max_step_skeletons = stats.max_step_skeletons(corpus, vocab, v)?;
    }
    Ok(report)
}

/// Fit of `total ≈ a · n^b` on log-log axes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub points: usize,
    pub distinct_lengths: usize,
}

/// Least-squares line through `(ln n, ln total)`; needs at least ten distinct `n`.
pub fn fit_power_law(points: &[(usize, usize)]) -> Result<ScalingFit, EvalError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, t)| n > 0 && t > 0)
        .map(|&(n, t)| ((n as f64).ln(), (t as f64).ln()))
        .collect();
    let distinct: BTreeSet<usize> = points
        .iter()
        .filter(|&&(n, t)| n > 0 && t > 0)
        .map(|&(n, _)| n)
        .collect();
    if distinct.len() < 10 {
        return Err(EvalError::TooFewLengths(distinct.len()));
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Ok(ScalingFit {
        a: (my - b * mx).exp(),
        b,
        points: usable.len(),
        distinct_lengths: distinct.len(),
    })
}

/// `(n, total unlabeled candidates)` per sentence along the arc-swift oracle path.
pub fn scaling_points(
    corpus: &[Sentence],
    vocab: &LabelVocab,
) -> Result<Vec<(usize, usize)>, OracleError> {
    let stats = corpus_stats(corpus, vocab, &[OracleVariant::Asw])?;
    Ok(stats.rows[0].iter().map(|r| (r.n, r.skeletons)).collect())
}

pub fn runtime_scaling_report(
    corpus: &[Sentence],
    vocab: &LabelVocab,
) -> Result<ScalingFit, EvalError> {
    fit_power_law(&scaling_points(corpus, vocab)?)
}

/// Worst case for arc-swift candidate counts: every token depends on its left
/// neighbour, so the oracle never pops and the stack grows by one per token.
pub fn right_branching_chain(n: usize) -> Sentence {
    let heads: Vec<usize> = (0..=n).map(|i| i.saturating_sub(1)).collect();
    sentence_from_heads(
        &heads,
        |d| if d == 1 { "root".into() } else { "dep".into() },
    )
}

/// Flat trees in which every token depends on the root.
pub fn flat_tree(n: usize) -> Sentence {
    sentence_from_heads(&vec![0; n + 1], |_| "root".into())
}

/// Largest stack size reached along the arc-swift oracle path.
pub fn max_stack_depth(sentence: &Sentence, vocab: &LabelVocab) -> Result<usize, OracleError> {
    let seq = oracle_sequence(
        &GoldTree::from_sentence(sentence, vocab)?,
        OracleVariant::Asw,
    )?;
    let mut state = ParserState::initial(sentence.len())?;
    let mut max = state.stack().len();
    for t in seq {
        state.apply_mut(SystemId::ArcSwift, t)?;
        max = max.max(state.stack().len());
    }
    Ok(max)
}

/// Histogram of oracle transition kinds, keyed by display name.
pub fn action_histogram(seqs: &[Vec<Transition>]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for t in seqs.iter().flatten() {
        let key = match t.action() {
            Action::LeftArcK(_) => "LARC[k]".to_string(),
            Action::RightArcK(_) => "RARC[k]".to_string(),
            a => a.to_string(),
        };
        *h.entry(key).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_recovers_exponent() {
        let pts: Vec<(usize, usize)> = (1..=20).map(|n| (n * 5, 3 * (n * 5) * (n * 5))).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.b - 2.0).abs() < 1e-9);
        assert!((fit.a - 3.0).abs() < 1e-6);
    }

    #[test]
    fn refuses_to_fit_few_lengths() {
        let pts = vec![(1, 2); 50];
        assert!(matches!(
            fit_power_law(&pts),
            Err(EvalError::TooFewLengths(1))
        ));
    }

    #[test]
    fn chain_and_flat_shapes() {
        let chain = right_branching_chain(4);
        assert_eq!(chain.heads(), vec![0, 0, 1, 2, 3]);
        let vocab = LabelVocab::from_corpus(std::slice::from_ref(&chain));
        assert_eq!(max_stack_depth(&chain, &vocab).unwrap(), 5);
        let flat = flat_tree(6);
        let vocab = LabelVocab::from_corpus(std::slice::from_ref(&flat));
        assert_eq!(max_stack_depth(&flat, &vocab).unwrap(), 2);
    }

    #[test]
    fn chain_candidates_are_quadratic() {
        let vocab = LabelVocab::new(["dep", "root"]);
        for n in 1..8 {
            let stats =
                corpus_stats(&[right_branching_chain(n)], &vocab, &[OracleVariant::Asw]).unwrap();
            // Before step i the stack holds i attached items (plus the root),
            // so Shift and RArc[1..=i] are feasible.
            assert_eq!(stats.rows[0][0].skeletons, n * (n + 1) / 2 + n, "n = {n}");
        }
    }
}
