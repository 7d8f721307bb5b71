//! Parser states and the transition semantics of arc-standard, arc-eager,
//! arc-hybrid and arc-swift.
//!
//! A state is `(stack, buffer, arcs)`. The stack always holds the artificial
//! root (index 0) at its bottom, the buffer is the suffix of the sentence
//! starting at `buffer_front`, and arcs are kept as a head slot per token so
//! that a second head can never be recorded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TransitionError;
use crate::treebank::{LabelId, LabelVocab, Prediction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemId {
    ArcStandard,
    ArcEager,
    ArcHybrid,
    ArcSwift,
}

impl SystemId {
    pub const ALL: [SystemId; 4] = [
        SystemId::ArcStandard,
        SystemId::ArcEager,
        SystemId::ArcHybrid,
        SystemId::ArcSwift,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            SystemId::ArcStandard => "asd",
            SystemId::ArcEager => "ae",
            SystemId::ArcHybrid => "ah",
            SystemId::ArcSwift => "asw",
        }
    }

    /// Whether parsing ends as soon as the buffer is exhausted.
    fn ends_with_buffer(self) -> bool {
        matches!(self, SystemId::ArcEager | SystemId::ArcSwift)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemId::ArcStandard => "arc-standard",
            SystemId::ArcEager => "arc-eager",
            SystemId::ArcHybrid => "arc-hybrid",
            SystemId::ArcSwift => "arc-swift",
        })
    }
}

impl FromStr for SystemId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asd" | "arc-standard" | "arc_standard" => Ok(SystemId::ArcStandard),
            "ae" | "arc-eager" | "arc_eager" => Ok(SystemId::ArcEager),
            "ah" | "arc-hybrid" | "arc_hybrid" => Ok(SystemId::ArcHybrid),
            "asw" | "arc-swift" | "arc_swift" => Ok(SystemId::ArcSwift),
            other => Err(format!(
                "unknown transition system {:?} (expected asd|ae|ah|asw)",
                other
            )),
        }
    }
}

/// An unlabeled transition. The derived order is the decoding tie-break
/// order: Shift < Reduce < LArc < RArc < LArc[k] < RArc[k], ascending `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Shift,
    Reduce,
    LeftArc,
    RightArc,
    LeftArcK(usize),
    RightArcK(usize),
}

impl Action {
    pub fn is_arc(self) -> bool {
        !matches!(self, Action::Shift | Action::Reduce)
    }

    pub fn is_left(self) -> bool {
        matches!(self, Action::LeftArc | Action::LeftArcK(_))
    }

    /// Attaches a label to an arc-inducing action; `Shift`/`Reduce` ignore it.
    pub fn with_label(self, label: LabelId) -> Transition {
        match self {
            Action::Shift => Transition::Shift,
            Action::Reduce => Transition::Reduce,
            Action::LeftArc => Transition::LeftArc(label),
            Action::RightArc => Transition::RightArc(label),
            Action::LeftArcK(k) => Transition::LeftArcK(k, label),
            Action::RightArcK(k) => Transition::RightArcK(k, label),
        }
    }

    fn belongs_to(self, system: SystemId) -> bool {
        match (self, system) {
            (Action::Shift, _) => true,
            (Action::Reduce, SystemId::ArcEager) => true,
            (Action::LeftArc | Action::RightArc, SystemId::ArcSwift) => false,
            (Action::LeftArc | Action::RightArc, _) => true,
            (Action::LeftArcK(k) | Action::RightArcK(k), SystemId::ArcSwift) => k >= 1,
            _ => false,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift => f.write_str("SHIFT"),
            Action::Reduce => f.write_str("REDUCE"),
            Action::LeftArc => f.write_str("LARC"),
            Action::RightArc => f.write_str("RARC"),
            Action::LeftArcK(k) => write!(f, "LARC[{}]", k),
            Action::RightArcK(k) => write!(f, "RARC[{}]", k),
        }
    }
}

/// A labeled transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transition {
    Shift,
    Reduce,
    LeftArc(LabelId),
    RightArc(LabelId),
    LeftArcK(usize, LabelId),
    RightArcK(usize, LabelId),
}

impl Transition {
    pub fn action(self) -> Action {
        match self {
            Transition::Shift => Action::Shift,
            Transition::Reduce => Action::Reduce,
            Transition::LeftArc(_) => Action::LeftArc,
            Transition::RightArc(_) => Action::RightArc,
            Transition::LeftArcK(k, _) => Action::LeftArcK(k),
            Transition::RightArcK(k, _) => Action::RightArcK(k),
        }
    }

    pub fn label(self) -> Option<LabelId> {
        match self {
            Transition::Shift | Transition::Reduce => None,
            Transition::LeftArc(l)
            | Transition::RightArc(l)
            | Transition::LeftArcK(_, l)
            | Transition::RightArcK(_, l) => Some(l),
        }
    }

    /// Renders the oracle-dump form, e.g. `RARC[2](obl)`.
    pub fn render(self, vocab: &LabelVocab) -> String {
        match self.label() {
            None => self.action().to_string(),
            Some(l) => format!("{}({})", self.action(), vocab.label(l)),
        }
    }

    /// Parses the oracle-dump form produced by [`Transition::render`].
    pub fn parse(text: &str, vocab: &LabelVocab) -> Result<Transition, TransitionError> {
        let text = text.trim();
        let syntax = || TransitionError::Syntax(text.to_string());
        match text {
            "SHIFT" => return Ok(Transition::Shift),
            "REDUCE" => return Ok(Transition::Reduce),
            _ => {}
        }
        let open = text.find('(').ok_or_else(syntax)?;
        let label = text[open + 1..].strip_suffix(')').ok_or_else(syntax)?;
        let label = vocab
            .get(label)
            .ok_or_else(|| TransitionError::UnknownLabel(label.to_string()))?;
        let head = &text[..open];
        let (kind, k) = match head.find('[') {
            None => (head, None),
            Some(b) => {
                let k = head[b + 1..]
                    .strip_suffix(']')
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(syntax)?;
                (&head[..b], Some(k))
            }
        };
        let action = match (kind, k) {
            ("LARC", None) => Action::LeftArc,
            ("RARC", None) => Action::RightArc,
            ("LARC", Some(k)) => Action::LeftArcK(k),
            ("RARC", Some(k)) => Action::RightArcK(k),
            _ => return Err(syntax()),
        };
        Ok(action.with_label(label))
    }
}

/// One head slot per token; slot 0 (the root) is always empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArcSet {
    slots: Vec<Option<(usize, LabelId)>>,
}

impl ArcSet {
    pub fn new(n: usize) -> Self {
        ArcSet {
            slots: vec![None; n + 1],
        }
    }

    pub fn from_heads(heads: &[usize], labels: &[LabelId]) -> Self {
        let mut arcs = ArcSet::new(heads.len() - 1);
        for d in 1..heads.len() {
            arcs.slots[d] = Some((heads[d], labels[d]));
        }
        arcs
    }

    pub fn n(&self) -> usize {
        self.slots.len() - 1
    }

    pub fn head(&self, dependent: usize) -> Option<usize> {
        self.slots[dependent].map(|(h, _)| h)
    }

    pub fn get(&self, dependent: usize) -> Option<(usize, LabelId)> {
        self.slots[dependent]
    }

    pub fn is_attached(&self, token: usize) -> bool {
        self.slots[token].is_some()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates `(head, dependent, label)` triples in dependent order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, LabelId)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(d, s)| s.map(|(h, l)| (h, d, l)))
    }

    /// Heads with a dummy 0 at index 0; unattached tokens map to 0.
    pub fn heads(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.map_or(0, |(h, _)| h)).collect()
    }

    fn attach(&mut self, head: usize, dependent: usize, label: LabelId) {
        assert!(dependent != 0, "the root cannot take a head");
        assert!(
            self.slots[dependent].is_none(),
            "token {} already has a head",
            dependent
        );
        self.slots[dependent] = Some((head, label));
    }

    /// Converts a complete arc set into per-token head/label strings.
    pub fn to_prediction(&self, vocab: &LabelVocab) -> Prediction {
        let (heads, labels) = self.slots[1..]
            .iter()
            .map(|s| {
                let (h, l) = s.expect("arc set is incomplete");
                (h, vocab.label(l).to_string())
            })
            .unzip();
        Prediction { heads, labels }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParserState {
    stack: Vec<usize>,
    buffer_front: usize,
    n: usize,
    arcs: ArcSet,
}

impl ParserState {
    /// Stack `[root]`, buffer `1..=n`, no arcs.
    pub fn initial(n: usize) -> Result<Self, TransitionError> {
        if n == 0 {
            return Err(TransitionError::EmptySentence);
        }
        Ok(ParserState {
            stack: vec![0],
            buffer_front: 1,
            n,
            arcs: ArcSet::new(n),
        })
    }

    /// Stack contents, bottom to top.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &ArcSet {
        &self.arcs
    }

    pub fn buffer_front(&self) -> Option<usize> {
        (self.buffer_front <= self.n).then_some(self.buffer_front)
    }

    pub fn buffer_len(&self) -> usize {
        self.n + 1 - self.buffer_front
    }

    pub fn is_attached(&self, token: usize) -> bool {
        self.arcs.is_attached(token)
    }

    /// The `k`-th stack item counted from the top (`k = 1` is the top).
    pub fn stack_item(&self, k: usize) -> Option<usize> {
        (k >= 1 && k <= self.stack.len()).then(|| self.stack[self.stack.len() - k])
    }

    pub fn top(&self) -> Option<usize> {
        self.stack.last().copied()
    }

    /// Whether the stack items above depth `k` (i.e. `i_1..i_{k-1}`) all have heads.
    fn above_attached(&self, k: usize) -> bool {
        (1..k).all(|j| self.stack_item(j).is_some_and(|t| self.arcs.is_attached(t)))
    }

    /// Checks the preconditions of `action` under `system`.
    pub fn check(&self, system: SystemId, action: Action) -> Result<(), TransitionError> {
        if !action.belongs_to(system) {
            return Err(TransitionError::WrongSystem { action, system });
        }
        let fail = |reason| {
            Err(TransitionError::Infeasible {
                action,
                system,
                reason,
            })
        };
        let buffer = self.buffer_front().is_some();
        let depth = self.stack.len();
        match (system, action) {
            (_, Action::Shift) => {
                if !buffer {
                    return fail("buffer is empty");
                }
            }
            (SystemId::ArcStandard, Action::LeftArc) => {
                if depth < 3 {
                    return fail("needs two stack items above the root");
                }
            }
            (SystemId::ArcStandard | SystemId::ArcHybrid, Action::RightArc) => {
                if depth < 2 {
                    return fail("needs two stack items");
                }
            }
            (SystemId::ArcHybrid | SystemId::ArcEager, Action::LeftArc) => {
                if !buffer {
                    return fail("buffer is empty");
                }
                if depth < 2 {
                    return fail("stack top is the root");
                }
                if self.is_attached(self.stack[depth - 1]) {
                    return fail("stack top already has a head");
                }
            }
            (SystemId::ArcEager, Action::RightArc) => {
                if !buffer {
                    return fail("buffer is empty");
                }
            }
            (SystemId::ArcEager, Action::Reduce) => {
                if depth < 2 || !self.is_attached(self.stack[depth - 1]) {
                    return fail("stack top has no head");
                }
            }
            (SystemId::ArcSwift, Action::RightArcK(k)) => {
                if !buffer {
                    return fail("buffer is empty");
                }
                if k > depth {
                    return fail("k exceeds the stack size");
                }
                if !self.above_attached(k) {
                    return fail("an item above depth k has no head");
                }
            }
            (SystemId::ArcSwift, Action::LeftArcK(k)) => {
                if !buffer {
                    return fail("buffer is empty");
                }
                if k >= depth {
                    return fail("k must address a non-root stack item");
                }
                if !self.above_attached(k) {
                    return fail("an item above depth k has no head");
                }
                if self.is_attached(self.stack[depth - k]) {
                    return fail("item at depth k already has a head");
                }
            }
            _ => unreachable!("membership checked above"),
        }
        Ok(())
    }

    /// All unlabeled transitions whose preconditions hold, in tie-break order.
    pub fn feasible(&self, system: SystemId) -> Vec<Action> {
        let mut out = Vec::with_capacity(4);
        let buffer = self.buffer_front().is_some();
        match system {
            SystemId::ArcSwift => {
                if !buffer {
                    return out;
                }
                out.push(Action::Shift);
                let mut rights = Vec::new();
                // Scan down the stack until the first unattached item.
                for k in 1..=self.stack.len() {
                    let item = self.stack[self.stack.len() - k];
                    rights.push(Action::RightArcK(k));
                    if !self.is_attached(item) {
                        if item != 0 {
                            out.push(Action::LeftArcK(k));
                        }
                        break;
                    }
                }
                out.extend(rights);
            }
            _ => {
                for action in [
                    Action::Shift,
                    Action::Reduce,
                    Action::LeftArc,
                    Action::RightArc,
                ] {
                    if action.belongs_to(system) && self.check(system, action).is_ok() {
                        out.push(action);
                    }
                }
            }
        }
        out
    }

    /// Returns the successor state; `self` is left untouched.
    pub fn apply(&self, system: SystemId, t: Transition) -> Result<ParserState, TransitionError> {
        let mut next = self.clone();
        next.apply_mut(system, t)?;
        Ok(next)
    }

    /// In-place variant of [`ParserState::apply`].
    pub fn apply_mut(&mut self, system: SystemId, t: Transition) -> Result<(), TransitionError> {
        self.check(system, t.action())?;
        let depth = self.stack.len();
        let j = self.buffer_front;
        match (system, t) {
            (_, Transition::Shift) => {
                self.stack.push(j);
                self.buffer_front += 1;
            }
            (SystemId::ArcEager, Transition::Reduce) => {
                self.stack.pop();
            }
            (SystemId::ArcStandard, Transition::LeftArc(l)) => {
                let top = self.stack.pop().unwrap();
                let second = self.stack.pop().unwrap();
                self.arcs.attach(top, second, l);
                self.stack.push(top);
            }
            (SystemId::ArcStandard | SystemId::ArcHybrid, Transition::RightArc(l)) => {
                let top = self.stack.pop().unwrap();
                self.arcs.attach(self.stack[depth - 2], top, l);
            }
            (SystemId::ArcEager | SystemId::ArcHybrid, Transition::LeftArc(l)) => {
                let top = self.stack.pop().unwrap();
                self.arcs.attach(j, top, l);
            }
            (SystemId::ArcEager, Transition::RightArc(l)) => {
                self.arcs.attach(self.stack[depth - 1], j, l);
                self.stack.push(j);
                self.buffer_front += 1;
            }
            (SystemId::ArcSwift, Transition::LeftArcK(k, l)) => {
                let target = self.stack[depth - k];
                self.stack.truncate(depth - k);
                self.arcs.attach(j, target, l);
            }
            (SystemId::ArcSwift, Transition::RightArcK(k, l)) => {
                self.stack.truncate(depth - k + 1);
                self.arcs.attach(self.stack[depth - k], j, l);
                self.stack.push(j);
                self.buffer_front += 1;
            }
            _ => unreachable!("preconditions checked above"),
        }
        Ok(())
    }

    pub fn is_terminal(&self, system: SystemId) -> bool {
        let buffer_empty = self.buffer_front().is_none();
        if system.ends_with_buffer() {
            buffer_empty
        } else {
            buffer_empty && self.stack.len() == 1
        }
    }

    /// Tokens that still lack a head.
    pub fn unattached(&self) -> Vec<usize> {
        (1..=self.n).filter(|&t| !self.is_attached(t)).collect()
    }

    /// Completes a terminal state: tokens without a head are attached to the
    /// root with `fallback`. Only non-oracle decoding can leave such tokens.
    pub fn finalize(&self, system: SystemId, fallback: LabelId) -> Result<ArcSet, TransitionError> {
        if !self.is_terminal(system) {
            return Err(TransitionError::NotTerminal(system));
        }
        let mut arcs = self.arcs.clone();
        for t in self.unattached() {
            arcs.attach(0, t, fallback);
        }
        Ok(arcs)
    }
}

/// Replays `seq` from the initial state of an `n`-token sentence.
pub fn replay(
    n: usize,
    system: SystemId,
    seq: &[Transition],
) -> Result<ParserState, TransitionError> {
    let mut state = ParserState::initial(n)?;
    for &t in seq {
        state.apply_mut(system, t)?;
    }
    Ok(state)
}

/// Writes transition sequences as blank-line separated blocks.
pub fn render_sequences(seqs: &[Vec<Transition>], vocab: &LabelVocab) -> String {
    let mut out = String::new();
    for seq in seqs {
        for t in seq {
            out.push_str(&t.render(vocab));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`render_sequences`].
pub fn parse_sequences(
    text: &str,
    vocab: &LabelVocab,
) -> Result<Vec<Vec<Transition>>, TransitionError> {
    let mut seqs = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                seqs.push(std::mem::take(&mut current));
            }
        } else {
            current.push(Transition::parse(line, vocab)?);
        }
    }
    if !current.is_empty() {
        seqs.push(current);
    }
    Ok(seqs)
}
