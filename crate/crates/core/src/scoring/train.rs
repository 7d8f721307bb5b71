//! Minibatch log-likelihood training with Adam and step annealing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{Lexicon, ModelDims, Regularization, ScorerModel};
use super::params::{adam_step, AdamConfig, AdamState, Gradients};
use crate::error::ModelError;
use crate::oracle::{sentence_oracle, OracleVariant};
use crate::transition::Transition;
use crate::treebank::Sentence;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub anneal_factor: f64,
    /// Annealing starts after this many epochs.
    pub anneal_after: usize,
    /// One annealing step per this many epochs once annealing has started.
    pub anneal_every: usize,
    pub dropout: f64,
    pub unk_replace: f64,
    pub seed: u64,
    pub dims: ModelDims,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: 10,
            lr0: 0.001,
            adam: AdamConfig::default(),
            batch_size: 32,
            anneal_factor: 0.5,
            anneal_after: 5,
            anneal_every: 1,
            dropout: 0.05,
            unk_replace: 0.10,
            seed: 1,
            dims: ModelDims::default(),
        }
    }
}

impl TrainerConfig {
    /// Ten epochs, halving the rate every epoch after the fifth.
    pub fn ptb_schedule() -> Self {
        TrainerConfig::default()
    }

    /// Thirty epochs, halving the rate every third epoch after the fifteenth.
    pub fn ud_schedule() -> Self {
        TrainerConfig {
            epochs: 30,
            anneal_after: 15,
            anneal_every: 3,
            ..TrainerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(format!("lr0 must be positive, got {}", self.lr0));
        }
        for (name, p) in [("dropout", self.dropout), ("unk_replace", self.unk_replace)] {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.batch_size == 0 || self.anneal_every == 0 {
            return Err("batch_size and anneal_every must be at least 1".into());
        }
        let d = &self.dims;
        if d.word_dim == 0 || d.pos_dim == 0 || d.repr_dim == 0 {
            return Err("embedding and representation sizes must be at least 1".into());
        }
        Ok(())
    }

    fn regularization(&self) -> Option<Regularization> {
        (self.dropout > 0.0 || self.unk_replace > 0.0).then_some(Regularization {
            dropout: self.dropout,
            unk_replace: self.unk_replace,
        })
    }
}

/// Learning rate for 1-based `epoch`.
pub fn learning_rate(cfg: &TrainerConfig, epoch: usize) -> f64 {
    let halvings = if epoch > cfg.anneal_after {
        (epoch - cfg.anneal_after - 1) / cfg.anneal_every + 1
    } else {
        0
    };
    cfg.lr0 * cfg.anneal_factor.powi(halvings as i32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sentence negative log-likelihood over the epoch.
    pub mean_nll: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ScorerModel,
    pub trace: Vec<EpochStats>,
}

fn sentence_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut x = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 31)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 29)
}

/// Trains a scorer for `variant`'s transition system.
///
/// Gradients of a minibatch are computed in parallel on the current rayon
/// pool and summed in corpus order, so results do not depend on the number
/// of threads.
pub fn train(
    corpus: &[Sentence],
    variant: OracleVariant,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    cfg.validate().map_err(ModelError::Format)?;
    let system = variant.system();
    let lexicon = Lexicon::from_corpus(corpus);
    let oracles: Vec<Vec<Transition>> = corpus
        .iter()
        .map(|s| sentence_oracle(s, &lexicon.labels, variant))
        .collect::<Result<_, _>>()?;
    let mut model = ScorerModel::new(system, lexicon, cfg.dims, cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let reg = cfg.regularization();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(sentence_seed(cfg.seed, epoch, usize::MAX));
        order.shuffle(&mut rng);
        let mut total_nll = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(f64, Gradients), ModelError>> = batch
                .par_iter()
                .map(|&i| {
                    model.loss_and_gradient(
                        &corpus[i],
                        &oracles[i],
                        system,
                        reg,
                        sentence_seed(cfg.seed, epoch, i),
                    )
                })
                .collect();
            let mut grads = Gradients::zeros_like(&model.params);
            for r in results {
                let (nll, g) = r?;
                total_nll += nll;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.params, &grads, &mut adam, &cfg.adam, lr)?;
        }
        let mean_nll = total_nll / corpus.len() as f64;
        log::info!("epoch {epoch}: lr {lr:.6}, mean nll {mean_nll:.4}");
        trace.push(EpochStats {
            epoch,
            lr,
            mean_nll,
        });
    }
    Ok(TrainOutcome { model, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ptb_schedule_halves_after_fifth() {
        let cfg = TrainerConfig::ptb_schedule();
        let rates: Vec<f64> = (1..=10).map(|e| learning_rate(&cfg, e) / 0.001).collect();
        assert_eq!(
            rates,
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
        );
    }

    #[test]
    fn ud_schedule_halves_every_third_after_fifteenth() {
        let cfg = TrainerConfig::ud_schedule();
        let halvings: Vec<i32> = (1..=30)
            .map(|e| (learning_rate(&cfg, e) / 0.001).log2().round() as i32)
            .collect();
        assert!(halvings[..15].iter().all(|&h| h == 0));
        assert_eq!(&halvings[15..18], &[-1, -1, -1]);
        assert_eq!(&halvings[18..21], &[-2, -2, -2]);
        assert_eq!(halvings[29], -5);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let cfg = TrainerConfig {
            dropout: 1.5,
            ..TrainerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainerConfig {
            lr0: 0.0,
            ..TrainerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = train(&[], OracleVariant::Asw, &TrainerConfig::default()).unwrap_err();
        assert!(matches!(err, ModelError::EmptyCorpus));
    }
}
