//! Attachment scores, dependency-length error bins and significance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::EvalError;
use crate::treebank::{Prediction, Sentence};

/// Upper bounds (inclusive) of the dependency-length bins; the last bin is open.
pub const LENGTH_BINS: [(&str, usize); 7] = [
    ("1", 1),
    ("2", 2),
    ("3-5", 5),
    ("6-10", 10),
    ("11-15", 15),
    ("16-20", 20),
    (">20", usize::MAX),
];

pub fn length_bin(length: usize) -> usize {
    LENGTH_BINS
        .iter()
        .position(|&(_, hi)| length <= hi)
        .expect("last bin is open")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BinCount {
    pub tokens: usize,
    pub errors: usize,
}

impl BinCount {
    pub fn error_rate(&self) -> Option<f64> {
        (self.tokens > 0).then(|| 100.0 * self.errors as f64 / self.tokens as f64)
    }
}

/// Token-level counts for one sentence or a whole corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub sentences: usize,
    /// Non-punctuation tokens.
    pub tokens: usize,
    pub correct_heads: usize,
    pub correct_labeled: usize,
    /// Predicted trees with more than one root dependent.
    pub multi_root: usize,
    pub bins: [BinCount; 7],
}

impl EvalCounts {
    pub fn add(&mut self, other: &EvalCounts) {
        self.sentences += other.sentences;
        self.tokens += other.tokens;
        self.correct_heads += other.correct_heads;
        self.correct_labeled += other.correct_labeled;
        self.multi_root += other.multi_root;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.tokens += b.tokens;
            a.errors += b.errors;
        }
    }

    pub fn uas(&self) -> f64 {
        percent(self.correct_heads, self.tokens)
    }

    pub fn las(&self) -> f64 {
        percent(self.correct_labeled, self.tokens)
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Scores one predicted tree against gold, skipping tokens where `mask` is true.
pub fn evaluate(
    pred: &Prediction,
    gold: &Sentence,
    mask: &[bool],
) -> Result<EvalCounts, EvalError> {
    let n = gold.len();
    if pred.len() != n || mask.len() != n {
        return Err(EvalError::TokenCount {
            sentence: 0,
            pred: pred.len(),
            gold: n,
        });
    }
    let mut c = EvalCounts {
        sentences: 1,
        ..EvalCounts::default()
    };
    if pred.root_count() > 1 {
        c.multi_root = 1;
    }
    for (i, tok) in gold.tokens.iter().enumerate() {
        if mask[i] {
            continue;
        }
        let head_ok = pred.heads[i] == tok.head;
        c.tokens += 1;
        if head_ok {
            c.correct_heads += 1;
            if pred.labels[i] == tok.deprel {
                c.correct_labeled += 1;
            }
        }
        let bin = &mut c.bins[length_bin(tok.head.abs_diff(i + 1))];
        bin.tokens += 1;
        if !head_ok {
            bin.errors += 1;
        }
    }
    Ok(c)
}

/// Head errors per gold dependency-length bin.
pub fn bin_errors_by_length(
    pred: &Prediction,
    gold: &Sentence,
    mask: &[bool],
) -> Result<[BinCount; 7], EvalError> {
    Ok(evaluate(pred, gold, mask)?.bins)
}

/// Scores a corpus, returning per-sentence counts in corpus order.
pub fn evaluate_corpus(
    preds: &[Prediction],
    gold: &[Sentence],
    masks: &[Vec<bool>],
) -> Result<Vec<EvalCounts>, EvalError> {
    if preds.len() != gold.len() || masks.len() != gold.len() {
        return Err(EvalError::Corpus(format!(
            "{} predicted vs {} gold sentences",
            preds.len(),
            gold.len()
        )));
    }
    preds
        .iter()
        .zip(gold)
        .zip(masks)
        .enumerate()
        .map(|(i, ((p, g), m))| {
            evaluate(p, g, m).map_err(|e| match e {
                EvalError::TokenCount { pred, gold, .. } => EvalError::TokenCount {
                    sentence: i + 1,
                    pred,
                    gold,
                },
                other => other,
            })
        })
        .collect()
}

pub fn total(counts: &[EvalCounts]) -> EvalCounts {
    let mut t = EvalCounts::default();
    for c in counts {
        t.add(c);
    }
    t
}

/// One-sided p-values for "A scores higher than B".
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub uas: f64,
    pub las: f64,
    pub samples: usize,
}

/// Paired bootstrap over sentences: each sample draws sentence indices with
/// replacement and compares micro-averaged scores of A and B on the same draw.
/// The p-value is `(#samples with A <= B + 1) / (samples + 1)`.
pub fn paired_bootstrap(
    a: &[EvalCounts],
    b: &[EvalCounts],
    samples: usize,
    seed: u64,
) -> Result<BootstrapResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Corpus(format!(
            "{} vs {} sentences",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(EvalError::Corpus("no sentences to resample".into()));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.tokens != y.tokens {
            return Err(EvalError::Corpus(format!(
                "sentence {}: scored token counts differ",
                i + 1
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.len();
    let (mut not_better_uas, mut not_better_las) = (0usize, 0usize);
    for _ in 0..samples {
        // Token totals are shared, so comparing correct counts compares scores.
        let (mut ua, mut ub, mut la, mut lb) = (0usize, 0usize, 0usize, 0usize);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            ua += a[i].correct_heads;
            ub += b[i].correct_heads;
            la += a[i].correct_labeled;
            lb += b[i].correct_labeled;
        }
        not_better_uas += usize::from(ua <= ub);
        not_better_las += usize::from(la <= lb);
    }
    let p = |c: usize| (c + 1) as f64 / (samples + 1) as f64;
    Ok(BootstrapResult {
        uas: p(not_better_uas),
        las: p(not_better_las),
        samples,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(pvalues: &[f64]) -> Result<Vec<f64>, EvalError> {
    if pvalues.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(EvalError::PValue(p));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvalues[i].total_cmp(&pvalues[j]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * pvalues[i]).min(1.0));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

pub const ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];

/// Reject flags of an adjusted p-value at each level of [`ALPHAS`].
pub fn rejections(adjusted: f64) -> [bool; 3] {
    ALPHAS.map(|a| adjusted < a)
}
