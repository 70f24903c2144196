//! Deterministic minibatch SGD with early stopping, plus central-difference
//! gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::model::{PairInstance, PairwiseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout: f64,
    /// Epochs without dev-loss improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            dropout: 0.25,
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best dev-loss epoch.
    pub model: PairwiseModel,
    pub history: Vec<EpochStats>,
    /// 0 means the initial parameters were never improved upon.
    pub best_epoch: usize,
}

fn bce(score: f64, label: f64) -> f64 {
    let s = score.clamp(1e-12, 1.0 - 1e-12);
    -(label * s.ln() + (1.0 - label) * (1.0 - s).ln())
}

/// Splitmix64-style mixing so every (seed, epoch, instance) triple gets an
/// independent dropout stream regardless of batch layout.
fn mask_seed(seed: u64, epoch: usize, instance: usize) -> u64 {
    let mut z = seed
        .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((instance as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean binary cross-entropy of the model over a set, in inference mode.
pub fn mean_loss(model: &PairwiseModel, set: &[PairInstance]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("cannot evaluate loss on an empty set"));
    }
    let mut sum = 0.0;
    for inst in set {
        sum += bce(model.score(inst)?, inst.label);
    }
    Ok(sum / set.len() as f64)
}

/// Fraction of instances classified correctly at threshold 0.5.
pub fn accuracy(model: &PairwiseModel, set: &[PairInstance]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("cannot evaluate accuracy on an empty set"));
    }
    let mut hits = 0usize;
    for inst in set {
        let predicted = model.score(inst)? > 0.5;
        if predicted == (inst.label > 0.5) {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

/// Trains with plain minibatch SGD and returns the parameters of the best
/// dev-loss epoch. Deterministic for a fixed config and inputs.
pub fn train(
    model: &PairwiseModel,
    train_set: &[PairInstance],
    dev_set: &[PairInstance],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::invalid(format!("dropout {} outside [0, 1)", config.dropout)));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::invalid(format!("learning rate {} is invalid", config.learning_rate)));
    }
    for inst in train_set.iter().chain(dev_set) {
        model.check_instance(inst)?;
    }

    let dev_or_train = |m: &PairwiseModel| {
        if dev_set.is_empty() { mean_loss(m, train_set) } else { mean_loss(m, dev_set) }
    };
    let mut model = model.clone();
    let mut best_model = model.clone();
    let mut best_dev = dev_or_train(&model)?;
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut history = Vec::new();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zeros_like();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let inst = &train_set[idx];
                let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed(config.seed, epoch, idx));
                let fwd = model.forward(inst, Some((&mut mask_rng, config.dropout)))?;
                batch_loss += bce(fwd.score, inst.label);
                model.backward(&fwd, inst.label, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss in epoch {epoch}"
                )));
            }
            epoch_loss += batch_loss;
            let mut flat = grads.params_vec();
            let scale = 1.0 / batch.len() as f64;
            for g in flat.iter_mut() {
                *g *= scale;
            }
            let norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
            let clip = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
            let mut params = model.params_vec();
            for (p, g) in params.iter_mut().zip(&flat) {
                *p -= config.learning_rate * clip * g;
            }
            model.set_params(&params)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let dev_loss = dev_or_train(&model)?;
        if !dev_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite dev loss after epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_loss, dev_loss });
        if dev_loss < best_dev {
            best_dev = dev_loss;
            best_model = model.clone();
            best_epoch = epoch;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { model: best_model, history, best_epoch })
}

/// Compares analytic gradients against central differences (h = 1e-5) on a
/// deterministic 5% parameter sample and returns the worst relative error.
/// Entries where both gradients are below 1e-10 in magnitude count as 0.
pub fn gradient_check(model: &PairwiseModel, inst: &PairInstance, seed: u64) -> Result<f64> {
    model.check_instance(inst)?;
    let mut grads = model.zeros_like();
    let fwd = model.forward(inst, None::<(&mut ChaCha8Rng, f64)>)?;
    model.backward(&fwd, inst.label, &mut grads);
    let analytic = grads.params_vec();

    let params = model.params_vec();
    let sample_size = ((params.len() as f64) * 0.05).round().max(1.0) as usize;
    let mut indices: Vec<usize> = (0..params.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.partial_shuffle(&mut rng, sample_size);
    let h = 1e-5;
    let mut scratch = model.clone();
    let mut worst = 0.0f64;
    for &i in indices.iter().take(sample_size) {
        let mut perturbed = params.clone();
        perturbed[i] = params[i] + h;
        scratch.set_params(&perturbed)?;
        let up = bce(scratch.score(inst)?, inst.label);
        perturbed[i] = params[i] - h;
        scratch.set_params(&perturbed)?;
        let down = bce(scratch.score(inst)?, inst.label);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        if a.abs() < 1e-10 && numeric.abs() < 1e-10 {
            continue;
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
