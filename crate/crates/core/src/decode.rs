//! Greedy and beam decoding with candidate accounting.

use std::fmt;
use std::str::FromStr;

use crate::error::ModelError;
use crate::scoring::{ScorerModel, Tape};
use crate::transition::{ArcSet, ParserState, Transition};
use crate::treebank::{LabelId, Sentence};

/// Candidates evaluated at one decoding step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCount {
    /// Feasible unlabeled transitions.
    pub skeletons: usize,
    /// Feasible labeled transitions.
    pub labeled: usize,
}

/// Result of decoding one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseOutput {
    pub arcs: ArcSet,
    pub transitions: Vec<Transition>,
    pub logprob: f64,
    /// Candidate counts of every scored state, in scoring order.
    pub trace: Vec<StepCount>,
    /// Tokens attached to the root by finalization.
    pub fallback: usize,
}

impl ParseOutput {
    pub fn total_skeletons(&self) -> usize {
        self.trace.iter().map(|c| c.skeletons).sum()
    }

    pub fn total_labeled(&self) -> usize {
        self.trace.iter().map(|c| c.labeled).sum()
    }
}

/// How completed beam items are ranked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BeamNorm {
    None,
    /// Log-probability divided by the number of transitions.
    #[default]
    Length,
}

impl FromStr for BeamNorm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(BeamNorm::None),
            "length" => Ok(BeamNorm::Length),
            _ => Err(format!(
                "unknown beam normalization {s:?} (expected none or length)"
            )),
        }
    }
}

impl fmt::Display for BeamNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeamNorm::None => "none",
            BeamNorm::Length => "length",
        })
    }
}

impl BeamNorm {
    pub fn score(self, logprob: f64, len: usize) -> f64 {
        match self {
            BeamNorm::None => logprob,
            BeamNorm::Length => logprob / len.max(1) as f64,
        }
    }
}

/// Label used when finalization attaches leftover tokens to the root.
pub fn fallback_label(model: &ScorerModel) -> LabelId {
    model.lexicon.labels.get("root").unwrap_or(LabelId(0))
}

fn finish(
    model: &ScorerModel,
    state: &ParserState,
    transitions: Vec<Transition>,
    logprob: f64,
    trace: Vec<StepCount>,
) -> Result<ParseOutput, ModelError> {
    let fallback = state.unattached().len();
    let arcs = state.finalize(model.system, fallback_label(model))?;
    Ok(ParseOutput {
        arcs,
        transitions,
        logprob,
        trace,
        fallback,
    })
}

/// Applies the highest-scoring feasible transition until the state is
/// terminal. Ties go to the first candidate in the canonical transition order.
pub fn greedy_parse(sentence: &Sentence, model: &ScorerModel) -> Result<ParseOutput, ModelError> {
    let system = model.system;
    let mut tape = Tape::new(model, sentence, None);
    let mut state = ParserState::initial(sentence.len())?;
    let mut transitions = Vec::new();
    let mut trace = Vec::new();
    let mut logprob = 0.0;
    while !state.is_terminal(system) {
        let step = tape.score(&state)?;
        trace.push(StepCount {
            skeletons: step.skeletons,
            labeled: step.candidates.len(),
        });
        let mut best = 0;
        for i in 1..step.log_probs.len() {
            if step.log_probs[i] > step.log_probs[best] {
                best = i;
            }
        }
        let t = step.candidates[best];
        logprob += step.log_probs[best];
        state.apply_mut(system, t)?;
        transitions.push(t);
    }
    finish(model, &state, transitions, logprob, trace)
}

#[derive(Clone, Debug)]
struct BeamItem {
    state: ParserState,
    logprob: f64,
    history: Vec<Transition>,
    terminal: bool,
}

/// Step-synchronous beam search. Terminal items keep their place in the beam
/// and compete with the expansions of live items; the search stops once every
/// item is terminal. With `beam_size == 1` this is exactly [`greedy_parse`].
pub fn beam_parse(
    sentence: &Sentence,
    model: &ScorerModel,
    beam_size: usize,
    norm: BeamNorm,
) -> Result<ParseOutput, ModelError> {
    let beam_size = beam_size.max(1);
    let system = model.system;
    let mut tape = Tape::new(model, sentence, None);
    let initial = ParserState::initial(sentence.len())?;
    let terminal = initial.is_terminal(system);
    let mut beam = vec![BeamItem {
        state: initial,
        logprob: 0.0,
        history: Vec::new(),
        terminal,
    }];
    let mut trace = Vec::new();

    while beam.iter().any(|b| !b.terminal) {
        let mut next: Vec<BeamItem> = Vec::new();
        let mut count = StepCount::default();
        for item in beam {
            if item.terminal {
                next.push(item);
                continue;
            }
            let step = tape.score(&item.state)?;
            count.skeletons += step.skeletons;
            count.labeled += step.candidates.len();
            for (i, &t) in step.candidates.iter().enumerate() {
                let state = item.state.apply(system, t)?;
                let mut history = item.history.clone();
                history.push(t);
                next.push(BeamItem {
                    terminal: state.is_terminal(system),
                    state,
                    logprob: item.logprob + step.log_probs[i],
                    history,
                });
            }
        }
        trace.push(count);
        // Stable sort keeps the canonical candidate order among ties.
        next.sort_by(|a, b| {
            let sa = norm.score(a.logprob, a.history.len());
            let sb = norm.score(b.logprob, b.history.len());
            sb.total_cmp(&sa)
        });
        next.truncate(beam_size);
        beam = next;
    }
    let best = beam
        .into_iter()
        .reduce(|a, b| {
            if norm.score(b.logprob, b.history.len()) > norm.score(a.logprob, a.history.len()) {
                b
            } else {
                a
            }
        })
        .expect("beam is never empty");
    finish(model, &best.state, best.history, best.logprob, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_norm_parses() {
        assert_eq!("none".parse::<BeamNorm>().unwrap(), BeamNorm::None);
        assert_eq!("length".parse::<BeamNorm>().unwrap(), BeamNorm::Length);
        assert!("max".parse::<BeamNorm>().is_err());
        assert_eq!(BeamNorm::Length.score(-6.0, 3), -2.0);
        assert_eq!(BeamNorm::None.score(-6.0, 3), -6.0);
    }
}
