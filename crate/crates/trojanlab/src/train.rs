//! Benign model training.
//!
//! Plain mini-batch gradient descent on softmax cross-entropy. Everything is
//! seeded: initialization draws and epoch shuffles come from one ChaCha
//! stream, so the same seed yields bit-identical weights.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledText;
use crate::error::{Error, Result};
use crate::model::{backward, cross_entropy, cross_entropy_grad, forward, ModelParams};
use crate::vocab::{tokenize, Vocabulary};

/// Initialization range for all weights: uniform(-0.1, 0.1).
const INIT_RANGE: f64 = 0.1;

/// Hyperparameters for benign training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 16,
            hidden_dim: 32,
            num_classes: 2,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 16,
            seed: 42,
        }
    }
}

/// Seeded uniform(-0.1, 0.1) initialization, drawn tensor by tensor in
/// storage order so the layout is reproducible.
pub fn init_params(vocab_size: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::zeros(vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.num_classes);
    for v in p.embedding.data_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    for v in p.w_enc.data_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    for v in p.b_enc.iter_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    for v in p.w_cls.data_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    for v in p.b_cls.iter_mut() {
        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
    }
    p
}

/// Fit a fresh model to the dataset by mini-batch gradient descent.
///
/// Requires at least two distinct labels. `epochs = 0` returns the seeded
/// initialization unchanged. Fails with [`Error::Divergence`] if the loss
/// goes non-finite.
pub fn train_benign(
    dataset: &[LabeledText],
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut seen = vec![false; cfg.num_classes];
    for s in dataset {
        if s.label >= cfg.num_classes {
            return Err(Error::InvalidConfig(format!(
                "label {} out of range for {} classes",
                s.label, cfg.num_classes
            )));
        }
        seen[s.label] = true;
    }
    if seen.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::InvalidConfig(
            "training data must contain at least two classes".into(),
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }

    let tokenized: Vec<Vec<u32>> = dataset
        .iter()
        .map(|s| tokenize(&s.text, vocab))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_params(vocab.len(), cfg, &mut rng);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let zero_repr = vec![0.0; cfg.hidden_dim];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = ModelParams::zeros(
                vocab.len(),
                cfg.embed_dim,
                cfg.hidden_dim,
                cfg.num_classes,
            );
            let mut loss = 0.0;
            for &i in batch {
                let trace = forward(&params, &tokenized[i])?;
                loss += cross_entropy(&trace.logits, dataset[i].label);
                let lg = cross_entropy_grad(&trace.logits, dataset[i].label);
                let g = backward(&params, &trace, &lg, &zero_repr)?;
                grads.accumulate(&g);
            }
            loss /= batch.len() as f64;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            params.step(cfg.learning_rate / batch.len() as f64, &grads);
        }
    }
    Ok(params)
}
