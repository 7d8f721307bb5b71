use thiserror::Error;

use crate::transition::{Action, SystemId};

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence starting at line {line}: {message}")]
    InvalidTree { line: usize, message: String },
    #[error("sentence {sentence}: predicted arcs do not cover every token")]
    MissingHead { sentence: usize },
    #[error("sentence must contain at least one token")]
    EmptySentence,
    #[error("{0}")]
    Mismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("{action} is not a transition of {system}")]
    WrongSystem { action: Action, system: SystemId },
    #[error("{action} infeasible under {system}: {reason}")]
    Infeasible {
        action: Action,
        system: SystemId,
        reason: &'static str,
    },
    #[error("state is not terminal under {0}")]
    NotTerminal(SystemId),
    #[error("sentence must contain at least one token")]
    EmptySentence,
    #[error("cannot parse transition {0:?}")]
    Syntax(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("gold tree is not projective")]
    NonProjective,
    #[error("no oracle rule applies at stack {stack:?}, buffer front {buffer_front:?}")]
    Stuck {
        stack: Vec<usize>,
        buffer_front: Option<usize>,
    },
    #[error("gold label {0:?} missing from the label vocabulary")]
    UnknownLabel(String),
    #[error("oracle replay does not reproduce the gold tree")]
    Mismatch,
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite gradient in {0}")]
    NonFinite(String),
    #[error("terminal state has no transitions to score")]
    Terminal,
    #[error("model format: {0}")]
    Format(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("model was built for {model}, not {requested}")]
    SystemMismatch {
        model: SystemId,
        requested: SystemId,
    },
    #[error("token index {index} outside [0, {n}]")]
    TokenIndex { index: usize, n: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sentence {sentence}: {pred} predicted tokens vs {gold} gold tokens")]
    TokenCount {
        sentence: usize,
        pred: usize,
        gold: usize,
    },
    #[error("corpus mismatch: {0}")]
    Corpus(String),
    #[error("p-value {0} outside [0, 1]")]
    PValue(f64),
    #[error("need at least one p-value")]
    Empty,
    #[error("need at least 10 distinct sentence lengths to fit, found {0}")]
    TooFewLengths(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
