//! Static oracles for the five training configurations and the arc-swift to
//! arc-eager sequence expansion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OracleError, TransitionError};
use crate::transition::{Action, ArcSet, ParserState, SystemId, Transition};
use crate::treebank::{heads_projective, LabelId, LabelVocab, Sentence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OracleVariant {
    /// arc-standard
    Asd,
    /// arc-eager, Shift whenever Shift and Reduce are both derivable
    AeS,
    /// arc-eager, Reduce as early as possible
    AeR,
    /// arc-hybrid
    Ah,
    /// arc-swift
    Asw,
}

impl OracleVariant {
    pub const ALL: [OracleVariant; 5] = [
        OracleVariant::Asd,
        OracleVariant::AeS,
        OracleVariant::AeR,
        OracleVariant::Ah,
        OracleVariant::Asw,
    ];

    pub fn system(self) -> SystemId {
        match self {
            OracleVariant::Asd => SystemId::ArcStandard,
            OracleVariant::AeS | OracleVariant::AeR => SystemId::ArcEager,
            OracleVariant::Ah => SystemId::ArcHybrid,
            OracleVariant::Asw => SystemId::ArcSwift,
        }
    }

    /// Default oracle for a system (arc-eager defaults to Shift preference).
    pub fn for_system(system: SystemId) -> Self {
        match system {
            SystemId::ArcStandard => OracleVariant::Asd,
            SystemId::ArcEager => OracleVariant::AeS,
            SystemId::ArcHybrid => OracleVariant::Ah,
            SystemId::ArcSwift => OracleVariant::Asw,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OracleVariant::Asd => "asd",
            OracleVariant::AeS => "aeS",
            OracleVariant::AeR => "aeR",
            OracleVariant::Ah => "ah",
            OracleVariant::Asw => "asw",
        }
    }
}

impl fmt::Display for OracleVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OracleVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown oracle variant {:?} (expected asd|aeS|aeR|ah|asw)",
                    s
                )
            })
    }
}

/// A gold tree in id form, with dependents indexed for the oracles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldTree {
    heads: Vec<usize>,
    labels: Vec<LabelId>,
    dependents: Vec<Vec<usize>>,
}

impl GoldTree {
    /// `heads[0]`/`labels[0]` are placeholders for the root.
    pub fn new(heads: Vec<usize>, labels: Vec<LabelId>) -> Self {
        let mut dependents = vec![Vec::new(); heads.len()];
        for d in 1..heads.len() {
            dependents[heads[d]].push(d);
        }
        GoldTree {
            heads,
            labels,
            dependents,
        }
    }

    pub fn from_sentence(sentence: &Sentence, vocab: &LabelVocab) -> Result<Self, OracleError> {
        let labels = std::iter::once(Ok(LabelId(0)))
            .chain(sentence.tokens.iter().map(|t| {
                vocab
                    .get(&t.deprel)
                    .ok_or_else(|| OracleError::UnknownLabel(t.deprel.clone()))
            }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GoldTree::new(sentence.heads(), labels))
    }

    pub fn n(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn head(&self, d: usize) -> usize {
        self.heads[d]
    }

    pub fn label(&self, d: usize) -> LabelId {
        self.labels[d]
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn arcs(&self) -> ArcSet {
        ArcSet::from_heads(&self.heads, &self.labels)
    }

    pub fn is_projective(&self) -> bool {
        heads_projective(&self.heads)
    }

    /// Whether every gold dependent of `t` already has its head in `state`.
    fn complete(&self, state: &ParserState, t: usize) -> bool {
        self.dependents[t].iter().all(|&d| state.is_attached(d))
    }
}

/// The canonical next transition for `state` under `variant`.
pub fn oracle_next(
    state: &ParserState,
    gold: &GoldTree,
    variant: OracleVariant,
) -> Result<Transition, OracleError> {
    let stuck = || OracleError::Stuck {
        stack: state.stack().to_vec(),
        buffer_front: state.buffer_front(),
    };
    let stack = state.stack();
    let depth = stack.len();
    let top = stack[depth - 1];
    let second = (depth >= 2).then(|| stack[depth - 2]);
    let front = state.buffer_front();

    let chosen = match variant {
        OracleVariant::Asd => match second {
            Some(s) if s != 0 && gold.head(s) == top => Transition::LeftArc(gold.label(s)),
            Some(s) if gold.head(top) == s && gold.complete(state, top) => {
                Transition::RightArc(gold.label(top))
            }
            _ => Transition::Shift,
        },
        OracleVariant::Ah => {
            if top != 0 && front.is_some_and(|b| gold.head(top) == b) {
                Transition::LeftArc(gold.label(top))
            } else if second.is_some_and(|s| gold.head(top) == s) && gold.complete(state, top) {
                Transition::RightArc(gold.label(top))
            } else {
                Transition::Shift
            }
        }
        OracleVariant::AeS | OracleVariant::AeR => {
            let b = front.ok_or_else(stuck)?;
            if top != 0 && gold.head(top) == b {
                Transition::LeftArc(gold.label(top))
            } else if gold.head(b) == top {
                Transition::RightArc(gold.label(b))
            } else if top != 0 && state.is_attached(top) && gold.complete(state, top) {
                let reduce = match variant {
                    OracleVariant::AeR => true,
                    // Reduce only when an arc between the buffer front and an
                    // item below the top would otherwise become underivable.
                    _ => stack[..depth - 1]
                        .iter()
                        .any(|&k| gold.head(b) == k || (k != 0 && gold.head(k) == b)),
                };
                if reduce {
                    Transition::Reduce
                } else {
                    Transition::Shift
                }
            } else {
                Transition::Shift
            }
        }
        OracleVariant::Asw => {
            let b = front.ok_or_else(stuck)?;
            let mut chosen = Transition::Shift;
            for k in 1..=depth {
                let item = stack[depth - k];
                if item != 0 && !state.is_attached(item) {
                    if gold.head(item) == b {
                        chosen = Transition::LeftArcK(k, gold.label(item));
                    }
                    break;
                }
            }
            if chosen == Transition::Shift {
                if let Some(k) = (1..=depth).find(|&k| stack[depth - k] == gold.head(b)) {
                    chosen = Transition::RightArcK(k, gold.label(b));
                }
            }
            chosen
        }
    };
    state
        .check(variant.system(), chosen.action())
        .map_err(|_| stuck())?;
    Ok(chosen)
}

/// Derives the full oracle transition sequence for a projective sentence.
///
/// The sequence is replayed while it is built; the final arc set must equal
/// the gold tree, labels included.
pub fn oracle_sequence(
    gold: &GoldTree,
    variant: OracleVariant,
) -> Result<Vec<Transition>, OracleError> {
    if !gold.is_projective() {
        return Err(OracleError::NonProjective);
    }
    let system = variant.system();
    let mut state = ParserState::initial(gold.n())?;
    let mut seq = Vec::with_capacity(2 * gold.n());
    while !state.is_terminal(system) {
        let t = oracle_next(&state, gold, variant)?;
        state.apply_mut(system, t)?;
        seq.push(t);
    }
    if state.arcs() != &gold.arcs() {
        return Err(OracleError::Mismatch);
    }
    Ok(seq)
}

/// Convenience wrapper over [`GoldTree::from_sentence`] and [`oracle_sequence`].
pub fn sentence_oracle(
    sentence: &Sentence,
    vocab: &LabelVocab,
    variant: OracleVariant,
) -> Result<Vec<Transition>, OracleError> {
    oracle_sequence(&GoldTree::from_sentence(sentence, vocab)?, variant)
}

/// Rewrites an arc-swift sequence as arc-eager: each `LArc[k]`/`RArc[k]`
/// becomes `k - 1` Reduces followed by `LArc`/`RArc` with the same label.
pub fn expand_swift_to_eager(seq: &[Transition]) -> Result<Vec<Transition>, TransitionError> {
    let mut out = Vec::with_capacity(seq.len());
    for &t in seq {
        match t {
            Transition::Shift => out.push(Transition::Shift),
            Transition::LeftArcK(k, l) | Transition::RightArcK(k, l) => {
                out.extend(std::iter::repeat_n(Transition::Reduce, k - 1));
                out.push(if matches!(t, Transition::LeftArcK(..)) {
                    Transition::LeftArc(l)
                } else {
                    Transition::RightArc(l)
                });
            }
            other => {
                return Err(TransitionError::WrongSystem {
                    action: other.action(),
                    system: SystemId::ArcSwift,
                })
            }
        }
    }
    Ok(out)
}

/// Per-kind transition counts for a sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub shift: usize,
    pub reduce: usize,
    pub left: usize,
    pub right: usize,
    /// Σ(k − 1) over `LArc[k]`/`RArc[k]`: the Reduces they subsume.
    pub fused_reduces: usize,
}

impl KindCounts {
    pub fn of(seq: &[Transition]) -> Self {
        let mut c = KindCounts::default();
        for t in seq {
            match t.action() {
                Action::Shift => c.shift += 1,
                Action::Reduce => c.reduce += 1,
                Action::LeftArc => c.left += 1,
                Action::RightArc => c.right += 1,
                Action::LeftArcK(k) => {
                    c.left += 1;
                    c.fused_reduces += k - 1;
                }
                Action::RightArcK(k) => {
                    c.right += 1;
                    c.fused_reduces += k - 1;
                }
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEP: LabelId = LabelId(0);
    const ROOT: LabelId = LabelId(1);

    fn tree(heads: &[usize]) -> GoldTree {
        let labels = heads
            .iter()
            .map(|&h| if h == 0 { ROOT } else { DEP })
            .collect();
        GoldTree::new(heads.to_vec(), labels)
    }

    #[test]
    fn two_token_swift() {
        let g = tree(&[0, 2, 0]);
        assert_eq!(
            oracle_sequence(&g, OracleVariant::Asw).unwrap(),
            vec![
                Transition::Shift,
                Transition::LeftArcK(1, DEP),
                Transition::RightArcK(1, ROOT)
            ]
        );
    }

    #[test]
    fn single_token() {
        let g = tree(&[0, 0]);
        assert_eq!(
            oracle_sequence(&g, OracleVariant::Asw).unwrap(),
            vec![Transition::RightArcK(1, ROOT)]
        );
        assert_eq!(
            oracle_sequence(&g, OracleVariant::Asd).unwrap(),
            vec![Transition::Shift, Transition::RightArc(ROOT)]
        );
    }

    #[test]
    fn figure_one_state() {
        // I ate fish with chopsticks .   ("with" attaches to "ate")
        let g = tree(&[0, 2, 0, 2, 2, 4, 2]);
        let prefix_swift = [
            Transition::Shift,
            Transition::LeftArcK(1, DEP),
            Transition::RightArcK(1, ROOT),
            Transition::RightArcK(1, DEP),
        ];
        let mut state = ParserState::initial(6).unwrap();
        for t in prefix_swift {
            assert_eq!(oracle_next(&state, &g, OracleVariant::Asw).unwrap(), t);
            state.apply_mut(SystemId::ArcSwift, t).unwrap();
        }
        assert_eq!(state.stack(), &[0, 2, 3]);
        assert_eq!(state.buffer_front(), Some(4));
        assert_eq!(
            oracle_next(&state, &g, OracleVariant::Asw).unwrap(),
            Transition::RightArcK(2, DEP)
        );

        let mut eager = ParserState::initial(6).unwrap();
        for t in [
            Transition::Shift,
            Transition::LeftArc(DEP),
            Transition::RightArc(ROOT),
            Transition::RightArc(DEP),
        ] {
            eager.apply_mut(SystemId::ArcEager, t).unwrap();
        }
        for v in [OracleVariant::AeS, OracleVariant::AeR] {
            let first = oracle_next(&eager, &g, v).unwrap();
            assert_eq!(first, Transition::Reduce);
            let next = eager.apply(SystemId::ArcEager, first).unwrap();
            assert_eq!(
                oracle_next(&next, &g, v).unwrap(),
                Transition::RightArc(DEP)
            );
        }
    }

    #[test]
    fn hybrid_left_arc_when_head_is_front() {
        let g = tree(&[0, 2, 0]);
        let mut s = ParserState::initial(2).unwrap();
        s.apply_mut(SystemId::ArcHybrid, Transition::Shift).unwrap();
        assert_eq!(
            oracle_next(&s, &g, OracleVariant::Ah).unwrap(),
            Transition::LeftArc(DEP)
        );
    }

    #[test]
    fn non_projective_rejected() {
        let g = tree(&[0, 3, 0, 2, 2]);
        for v in OracleVariant::ALL {
            assert!(matches!(
                oracle_sequence(&g, v),
                Err(OracleError::NonProjective)
            ));
        }
    }

    #[test]
    fn expansion() {
        let seq = [
            Transition::Shift,
            Transition::LeftArcK(1, DEP),
            Transition::RightArcK(1, ROOT),
        ];
        assert_eq!(
            expand_swift_to_eager(&seq).unwrap(),
            vec![
                Transition::Shift,
                Transition::LeftArc(DEP),
                Transition::RightArc(ROOT)
            ]
        );
        assert_eq!(
            expand_swift_to_eager(&[Transition::RightArcK(3, DEP)]).unwrap(),
            vec![
                Transition::Reduce,
                Transition::Reduce,
                Transition::RightArc(DEP)
            ]
        );
        assert!(expand_swift_to_eager(&[Transition::Reduce]).is_err());
    }

    #[test]
    fn aes_and_aer_differ_only_in_reduce_placement() {
        // a b c with 0->a, a->b, a->c: aeR reduces b before c arrives
        let g = tree(&[0, 0, 1, 1]);
        let s = oracle_sequence(&g, OracleVariant::AeS).unwrap();
        let r = oracle_sequence(&g, OracleVariant::AeR).unwrap();
        assert_eq!(s, r);
        // 0->b, b->a, b->c, c->d, b->e: Shift-preferring defers the Reduce of d
        let g = tree(&[0, 2, 0, 2, 3, 2]);
        let s = oracle_sequence(&g, OracleVariant::AeS).unwrap();
        let r = oracle_sequence(&g, OracleVariant::AeR).unwrap();
        assert_eq!(s.len(), r.len());
        let strip = |v: &[Transition]| -> Vec<Transition> {
            v.iter()
                .copied()
                .filter(|t| *t != Transition::Reduce)
                .collect()
        };
        assert_eq!(strip(&s), strip(&r));
    }
}
