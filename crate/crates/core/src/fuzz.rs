//! Property checks over random projective trees and exhaustive enumeration
//! of short sentences, with shrinking of failing trees.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::enumerate::{derivations, projective_trees};
use crate::oracle::{expand_swift_to_eager, oracle_sequence, GoldTree, KindCounts, OracleVariant};
use crate::transition::{replay, SystemId};
use crate::treebank::{random_projective_tree, sentence_from_heads, LabelVocab, Sentence};

/// Labels sampled for generated trees.
pub const FUZZ_LABELS: [&str; 8] = [
    "root", "nsubj", "obj", "det", "amod", "advmod", "case", "punct",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzConfig {
    pub trees: usize,
    pub max_n: usize,
    pub seed: u64,
    /// Also run the exhaustive enumeration check up to this length (0 disables it).
    pub enumerate_up_to: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            trees: 1000,
            max_n: 30,
            seed: 7,
            enumerate_up_to: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub property: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzFailure {
    pub violation: Violation,
    /// Smallest failing tree found by shrinking the original.
    pub minimal: Sentence,
    pub original_len: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FuzzReport {
    pub trees_checked: usize,
    pub tokens_checked: usize,
    pub enumeration_lengths: usize,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn fuzz_vocab() -> LabelVocab {
    LabelVocab::new(FUZZ_LABELS)
}

/// The random corpus used by the property checks; deterministic in `seed`.
pub fn fuzz_corpus(trees: usize, max_n: usize, seed: u64) -> Vec<Sentence> {
    let vocab = fuzz_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trees)
        .map(|_| {
            let n = rng.random_range(1..=max_n.max(1));
            random_projective_tree(n, &vocab, rng.random()).expect("n >= 1")
        })
        .collect()
}

fn violation(property: &'static str, message: impl Into<String>) -> Violation {
    Violation {
        property,
        message: message.into(),
    }
}

/// Checks every per-tree property: labeled oracle round trip for all five
/// oracle variants, arc-swift to arc-eager expansion equivalence, and the
/// sequence-length identities.
pub fn check_tree(sentence: &Sentence, vocab: &LabelVocab) -> Result<(), Violation> {
    let gold = GoldTree::from_sentence(sentence, vocab)
        .map_err(|e| violation("gold tree", e.to_string()))?;
    let n = gold.n();
    let mut seqs = Vec::new();
    for variant in OracleVariant::ALL {
        let seq = oracle_sequence(&gold, variant)
            .map_err(|e| violation("oracle round trip", format!("{variant}: {e}")))?;
        let state = replay(n, variant.system(), &seq)
            .map_err(|e| violation("oracle round trip", format!("{variant}: {e}")))?;
        if !state.is_terminal(variant.system()) || state.arcs() != &gold.arcs() {
            return Err(violation(
                "oracle round trip",
                format!("{variant}: replay differs from gold"),
            ));
        }
        seqs.push((variant, seq));
    }
    let seq_of = |v: OracleVariant| &seqs.iter().find(|(x, _)| *x == v).unwrap().1;
    let asw = seq_of(OracleVariant::Asw);
    let expanded = expand_swift_to_eager(asw).map_err(|e| violation("expansion", e.to_string()))?;
    let eager = replay(n, SystemId::ArcEager, &expanded)
        .map_err(|e| violation("expansion", format!("expanded sequence infeasible: {e}")))?;
    if !eager.is_terminal(SystemId::ArcEager) || eager.arcs() != &gold.arcs() {
        return Err(violation(
            "expansion",
            "expanded sequence derives a different arc set",
        ));
    }
    let asw_k = KindCounts::of(asw);
    if asw.len() != 2 * n - asw_k.right {
        return Err(violation(
            "length identity",
            format!("asw length {} != 2n - #RArc[k]", asw.len()),
        ));
    }
    let aer = seq_of(OracleVariant::AeR);
    let reduces = KindCounts::of(&expanded).reduce;
    if asw.len() + reduces != aer.len() {
        return Err(violation(
            "length identity",
            format!(
                "asw length {} != aeR length {} - {reduces}",
                asw.len(),
                aer.len()
            ),
        ));
    }
    for v in [OracleVariant::AeS, OracleVariant::AeR] {
        let s = seq_of(v);
        let k = KindCounts::of(s);
        if s.len() != 2 * n - k.right + k.reduce {
            return Err(violation(
                "length identity",
                format!("{v} length {} != 2n - #RArc + #Reduce", s.len()),
            ));
        }
    }
    Ok(())
}

/// Removes leaf token `d` and renumbers the rest; the result stays a
/// projective tree.
fn delete_leaf(sentence: &Sentence, d: usize) -> Sentence {
    let mut kept: Vec<_> = sentence
        .tokens
        .iter()
        .filter(|t| t.id != d)
        .cloned()
        .collect();
    let shift = |i: usize| if i > d { i - 1 } else { i };
    for t in &mut kept {
        t.id = shift(t.id);
        t.head = shift(t.head);
        t.form = format!("w{}", t.id);
    }
    Sentence {
        comments: Vec::new(),
        tokens: kept,
    }
}

/// Repeatedly deletes leaves while `fails` keeps returning a violation.
pub fn shrink(
    sentence: &Sentence,
    mut fails: impl FnMut(&Sentence) -> Option<Violation>,
) -> (Sentence, Option<Violation>) {
    let mut current = sentence.clone();
    let mut last = fails(&current);
    'outer: while current.len() > 1 {
        let heads = current.heads();
        for d in 1..=current.len() {
            if heads.contains(&d) {
                continue;
            }
            let candidate = delete_leaf(&current, d);
            if candidate.root_count() == 0 {
                continue;
            }
            if let Some(v) = fails(&candidate) {
                current = candidate;
                last = Some(v);
                continue 'outer;
            }
        }
        break;
    }
    (current, last)
}

/// Exhaustive check for every length `1..=max_n`: the trees derived by
/// complete transition sequences are exactly the projective trees; arc-swift
/// derives each tree once; arc-eager derives some tree more than once when
/// `max_n >= 2`.
pub fn check_enumeration(max_n: usize) -> Result<(), Violation> {
    let mut eager_ambiguous = false;
    for n in 1..=max_n {
        let expected: BTreeSet<Vec<usize>> = projective_trees(n).into_iter().collect();
        for system in SystemId::ALL {
            let found = derivations(n, system);
            let trees: BTreeSet<Vec<usize>> = found.keys().cloned().collect();
            if trees != expected {
                return Err(violation(
                    "enumeration",
                    format!(
                        "{system}, n = {n}: derives {} trees, expected {}",
                        trees.len(),
                        expected.len()
                    ),
                ));
            }
            if system == SystemId::ArcSwift {
                if let Some((t, c)) = found.iter().find(|(_, &c)| c != 1) {
                    return Err(violation(
                        "enumeration",
                        format!("arc-swift derives {t:?} {c} times"),
                    ));
                }
            }
            if system == SystemId::ArcEager && found.values().any(|&c| c > 1) {
                eager_ambiguous = true;
            }
        }
    }
    if max_n >= 2 && !eager_ambiguous {
        return Err(violation(
            "enumeration",
            "arc-eager shows no spurious ambiguity",
        ));
    }
    Ok(())
}

/// Runs all property suites. Per-tree checks run in parallel on the current
/// rayon pool; failures are reported in corpus order.
pub fn run_fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let vocab = fuzz_vocab();
    let corpus = fuzz_corpus(cfg.trees, cfg.max_n, cfg.seed);
    let mut failures: Vec<FuzzFailure> = corpus
        .par_iter()
        .filter_map(|s| {
            let v = check_tree(s, &vocab).err()?;
            let (minimal, shrunk) = shrink(s, |c| check_tree(c, &vocab).err());
            Some(FuzzFailure {
                violation: shrunk.unwrap_or(v),
                minimal,
                original_len: s.len(),
            })
        })
        .collect();
    if cfg.enumerate_up_to > 0 {
        if let Err(v) = check_enumeration(cfg.enumerate_up_to) {
            failures.push(FuzzFailure {
                violation: v,
                minimal: sentence_from_heads(&[0], |_| String::new()),
                original_len: 0,
            });
        }
    }
    failures.sort_by_key(|f| f.minimal.len());
    FuzzReport {
        trees_checked: corpus.len(),
        tokens_checked: corpus.iter().map(Sentence::len).sum(),
        enumeration_lengths: cfg.enumerate_up_to,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_run_passes() {
        let report = run_fuzz(&FuzzConfig {
            trees: 50,
            max_n: 12,
            seed: 3,
            enumerate_up_to: 3,
        });
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.trees_checked, 50);
    }

    #[test]
    fn shrinking_finds_small_counterexample() {
        let vocab = fuzz_vocab();
        let s = random_projective_tree(15, &vocab, 11).unwrap();
        // Pretend every tree with at least three tokens violates a property.
        let (min, v) = shrink(&s, |c| (c.len() >= 3).then(|| violation("size", "too big")));
        assert_eq!(min.len(), 3);
        assert!(v.is_some());
        assert!(crate::treebank::is_projective(&min));
        assert!(min.validate().is_ok());
    }
}
