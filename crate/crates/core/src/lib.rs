//! Transition-based dependency parsing toolkit.
//!
//! Implements arc-standard, arc-eager, arc-hybrid and arc-swift with static
//! oracles, a biaffine transition scorer trained by log-likelihood, greedy and
//! beam decoding, attachment-score evaluation with paired bootstrap testing,
//! and corpus statistics over transition sequences.

pub mod config;
pub mod decode;
pub mod enumerate;
pub mod error;
pub mod eval;
pub mod fuzz;
pub mod oracle;
pub mod scoring;
pub mod stats;
pub mod transition;
pub mod treebank;

pub use error::{EvalError, ModelError, OracleError, TransitionError, TreebankError};
pub use oracle::{expand_swift_to_eager, oracle_next, oracle_sequence, GoldTree, OracleVariant};
pub use transition::{Action, ArcSet, ParserState, SystemId, Transition};
pub use treebank::{
    is_projective, parse_conllu, punctuation_mask, random_projective_tree, write_conllu, LabelId,
    LabelVocab, Prediction, PunctPolicy, Sentence, Token,
};
