//! Transition scoring: features, the biaffine combination, softmax scores,
//! log-likelihood gradients, Adam training and model files.

mod io;
mod model;
mod params;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_HEADER};
pub use model::{
    biaffine_combine, Lexicon, ModelDims, Regularization, ScorerModel, StepScores, Tape, TokenRepr,
    PAD, ROOT, UNK,
};
pub use params::{
    adam_step, AdamConfig, AdamState, BiaffineParams, Gradients, Layers, Params, Tensor,
};
pub use train::{learning_rate, train, EpochStats, TrainOutcome, TrainerConfig};
