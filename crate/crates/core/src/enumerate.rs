//! Exhaustive search over transition sequences for short sentences.

use std::collections::BTreeMap;

use crate::transition::{ParserState, SystemId, Transition};
use crate::treebank::{find_cycle, heads_projective, LabelId};

/// Every complete derivation reachable from the initial state, grouped by the
/// tree it derives (head vectors with a dummy entry at index 0) and counted.
///
/// A derivation is complete when it reaches a terminal state in which every
/// token has a head; terminal states that leave tokens unattached are dropped.
pub fn derivations(n: usize, system: SystemId) -> BTreeMap<Vec<usize>, usize> {
    let mut out = BTreeMap::new();
    let state = ParserState::initial(n).expect("n >= 1");
    walk(&state, system, &mut out);
    out
}

fn walk(state: &ParserState, system: SystemId, out: &mut BTreeMap<Vec<usize>, usize>) {
    if state.is_terminal(system) {
        if state.unattached().is_empty() {
            *out.entry(state.arcs().heads()).or_insert(0) += 1;
        }
        return;
    }
    for action in state.feasible(system) {
        let next = state
            .apply(system, action.with_label(LabelId(0)))
            .expect("feasible transitions apply");
        walk(&next, system, out);
    }
}

/// All projective dependency trees over `n` tokens rooted at 0 (any number of
/// root dependents), by brute force over head assignments.
pub fn projective_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n + 1];
    fill(1, n, &mut heads, &mut out);
    out
}

fn fill(d: usize, n: usize, heads: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if d > n {
        if find_cycle(heads).is_none() && heads_projective(heads) {
            out.push(heads.clone());
        }
        return;
    }
    for h in 0..=n {
        if h != d {
            heads[d] = h;
            fill(d + 1, n, heads, out);
        }
    }
}

/// Replays a sequence, returning `None` if any step is infeasible.
pub fn replay_heads(n: usize, system: SystemId, seq: &[Transition]) -> Option<Vec<usize>> {
    crate::transition::replay(n, system, seq)
        .ok()
        .map(|s| s.arcs().heads())
}
