//! SGD training with a piecewise-exponential learning-rate schedule.

use alloc::vec::Vec;

use crate::corpus::{make_batches, EncodedSample};
use crate::error::{bail, Error, Result};
use crate::eval::predict_classes;
use crate::features::{WordVecStore, PAD_ID};
use crate::model::{loss_and_gradients, Model, ModelParams};
use crate::numcore::{Parameters, Rng, Tensor};

/// What the decay interval counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayUnit {
    Epochs,
    Steps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub lr0: f64,
    pub decay_interval: usize,
    pub decay_unit: DecayUnit,
    pub decay_factor: f64,
    pub lr_floor: f64,
    pub max_epochs: usize,
    /// Global-norm gradient clipping; off when `None`.
    pub clip_norm: Option<f64>,
    /// Stop once this many epochs pass without a new best eval accuracy.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            seed: 0,
            lr0: 0.1,
            decay_interval: 600,
            decay_unit: DecayUnit::Epochs,
            decay_factor: 0.1,
            lr_floor: 1e-4,
            max_epochs: 50,
            clip_norm: None,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(Config, "batch size must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            bail!(Config, "decay factor {} outside (0, 1)", self.decay_factor);
        }
        if !(self.lr_floor < self.lr0) || self.lr_floor < 0.0 {
            bail!(Config, "learning-rate floor {} must lie in [0, {})", self.lr_floor, self.lr0);
        }
        if self.decay_interval == 0 {
            bail!(Config, "decay interval must be positive");
        }
        if self.patience == Some(0) {
            bail!(Config, "patience must be positive");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            bail!(Config, "clip norm must be positive");
        }
        Ok(())
    }
}

/// `max(lr_floor, lr0 · γ^⌊t / interval⌋)`, `t` counted in `cfg.decay_unit`.
pub fn lr_at(t: usize, cfg: &TrainConfig) -> f64 {
    let stage = (t / cfg.decay_interval) as f64;
    (cfg.lr0 * libm::pow(cfg.decay_factor, stage)).max(cfg.lr_floor)
}

/// `θ ← θ − lr·∇θ` for every tensor; the pad embedding row is never updated.
pub fn sgd_step(params: &mut ModelParams, grads: &mut ModelParams, lr: f64) -> Result<()> {
    grads.embedding.row_mut(PAD_ID as usize).fill(0.0);
    let flat: Vec<&Tensor> = grads.named_tensors().into_iter().map(|(_, t)| t).collect();
    let mut i = 0;
    let mut err = None;
    params.visit_mut(&mut |name, t| {
        match flat.get(i) {
            Some(g) if g.shape() == t.shape() => t.axpy(-lr, g).expect("shapes checked"),
            _ => err = Some(Error::Shape(alloc::format!("gradient for {name} does not match"))),
        }
        i += 1;
    });
    match err {
        Some(e) => Err(e),
        None if i != flat.len() => bail!(Shape, "gradient has {} tensors, parameters {i}", flat.len()),
        None => Ok(()),
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    grads.visit(&mut |_, t| sq += t.sum_squares());
    let norm = libm::sqrt(sq);
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.visit_mut(&mut |_, t| t.scale(scale));
    }
    norm
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed SGD steps.
    pub step: usize,
    pub best_eval_acc: Option<f64>,
}

impl TrainState {
    pub fn new(params: ModelParams) -> Self {
        Self { params, epoch: 0, step: 0, best_eval_acc: None }
    }

    pub fn lr(&self, cfg: &TrainConfig) -> f64 {
        match cfg.decay_unit {
            DecayUnit::Epochs => lr_at(self.epoch, cfg),
            DecayUnit::Steps => lr_at(self.step, cfg),
        }
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One pass over `train`: shuffle, batch, forward, backward, SGD step.
/// Returns the mean batch loss.
pub fn train_epoch(state: &mut TrainState, train: &[EncodedSample], words: Option<&WordVecStore>, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    let batches = make_batches(train, cfg.batch_size, PAD_ID, epoch_seed(cfg.seed, state.epoch), true)?;
    let mut dropout_rng = Rng::with_stream(cfg.seed, state.epoch as u64 + 1);
    let mut total = 0.0;
    for (index, batch) in batches.iter().enumerate() {
        let lr = state.lr(cfg);
        let (loss, mut grads, _) = loss_and_gradients(batch, &state.params, words, true, &mut dropout_rng)?;
        if !loss.is_finite() {
            bail!(Numeric, "non-finite loss {loss} at epoch {} batch {index} (lr {lr})", state.epoch);
        }
        if let Some(max_norm) = cfg.clip_norm {
            clip_global_norm(&mut grads, max_norm);
        }
        sgd_step(&mut state.params, &mut grads, lr)?;
        state.step += 1;
        total += loss;
    }
    state.epoch += 1;
    Ok(if batches.is_empty() { 0.0 } else { total / batches.len() as f64 })
}

/// One row of the training history; `epoch` is 0-based and `lr` is the
/// rate in force at the start of that epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub eval_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub best: Model,
    /// History epoch whose parameters were kept; `None` when no training happened.
    pub best_epoch: Option<usize>,
    pub history: Vec<HistoryRow>,
}

/// Trains for up to `cfg.max_epochs`, evaluating after each epoch and keeping
/// the parameters with the best eval accuracy (earliest wins ties). With an
/// empty eval set the last epoch is kept and patience is ignored.
pub fn fit(
    model: Model,
    train: &[EncodedSample],
    eval: &[EncodedSample],
    words: Option<&WordVecStore>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&HistoryRow),
) -> Result<FitOutcome> {
    cfg.validate()?;
    let Model { params, vocab, lexicon } = model;
    let mut state = TrainState::new(params.clone());
    let mut best = params;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(cfg.max_epochs);
    for _ in 0..cfg.max_epochs {
        let (epoch, lr) = (state.epoch, state.lr(cfg));
        let loss = train_epoch(&mut state, train, words, cfg)?;
        let eval_acc = if eval.is_empty() {
            0.0
        } else {
            let predicted = predict_classes(&state.params, eval, words, cfg.batch_size)?;
            let correct = predicted.iter().zip(eval).filter(|(p, s)| **p == s.gold).count();
            correct as f64 / eval.len() as f64
        };
        let row = HistoryRow { epoch, lr, loss, eval_acc };
        on_epoch(&row);
        history.push(row);
        let improved = match state.best_eval_acc {
            _ if eval.is_empty() => true,
            None => true,
            Some(b) => eval_acc > b,
        };
        if improved {
            state.best_eval_acc = Some(eval_acc);
            best = state.params.clone();
            best_epoch = Some(epoch);
        }
        let stale = best_epoch.map_or(0, |b| epoch - b);
        if !eval.is_empty() && cfg.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    Ok(FitOutcome { best: Model::new(best, vocab, lexicon)?, best_epoch, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WORD_DIM;
    use crate::model::{ModelDims, Variant};

    #[test]
    fn schedule_steps_and_floor() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, &cfg), 0.1);
        assert_eq!(lr_at(599, &cfg), 0.1);
        assert!((lr_at(600, &cfg) - 0.01).abs() < 1e-15);
        assert!((lr_at(1800, &cfg) - 1e-4).abs() < 1e-15);
        assert_eq!(lr_at(1_000_000, &cfg), 1e-4);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig { decay_factor: 1.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { lr_floor: 0.5, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    fn tiny() -> ModelParams {
        let dims = ModelDims { char_dim: 3, word_dim: WORD_DIM, hidden: 2, fc1: 4, fc2: 4, classes: 3 };
        ModelParams::init(Variant::Cc, dims, 5, &mut Rng::new(0)).unwrap()
    }

    #[test]
    fn sgd_arithmetic_and_pad_mask() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.visit_mut(&mut |_, t| t.fill(1.0));
        sgd_step(&mut p, &mut g, 0.1).unwrap();
        assert!(p.embedding.row(0).iter().all(|&v| v == 0.0));
        assert!((p.fc1.b.data()[0] - (before.fc1.b.data()[0] - 0.1)).abs() < 1e-15);
        let mut q = before.clone();
        sgd_step(&mut q, &mut g, 0.0).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn sgd_rejects_mismatched_gradients() {
        let mut p = tiny();
        let mut g = tiny();
        g.fc1.b = Tensor::zeros(&[9]).unwrap();
        assert!(sgd_step(&mut p, &mut g, 0.1).is_err());
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = tiny().zeros_like();
        g.visit_mut(&mut |_, t| t.fill(3.0));
        let before = clip_global_norm(&mut g, 1.0);
        assert!(before > 1.0);
        let mut sq = 0.0;
        g.visit(&mut |_, t| sq += t.sum_squares());
        assert!((libm::sqrt(sq) - 1.0).abs() < 1e-12);
    }
}
