//! JSON training configuration. Every field is optional.

use std::path::Path;

use polyphone_core::corpus::SplitRule;
use polyphone_core::model::{DropoutRates, ModelDims};
use polyphone_core::train::{DecayUnit, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Epochs,
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dims {
    pub char_dim: usize,
    pub hidden: usize,
    pub fc1: usize,
    pub fc2: usize,
}

impl Default for Dims {
    fn default() -> Self {
        let d = ModelDims::standard(0);
        Self { char_dim: d.char_dim, hidden: d.hidden, fc1: d.fc1, fc2: d.fc2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub lr0: f64,
    pub decay_interval: usize,
    pub decay_unit: Unit,
    pub decay_factor: f64,
    pub lr_floor: f64,
    pub max_epochs: usize,
    pub clip_norm: Option<f64>,
    pub patience: Option<usize>,
    pub encoder_dropout: f64,
    pub predictor_dropout: f64,
    pub dims: Dims,
    pub eval_fraction: f64,
    pub small_eval_fraction: f64,
    pub small_threshold: usize,
    /// When set, the lexicon must define exactly this many pinyin classes.
    pub expect_classes: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = SplitRule::default();
        let d = DropoutRates::default();
        Self {
            batch_size: t.batch_size,
            seed: t.seed,
            lr0: t.lr0,
            decay_interval: t.decay_interval,
            decay_unit: Unit::Epochs,
            decay_factor: t.decay_factor,
            lr_floor: t.lr_floor,
            max_epochs: t.max_epochs,
            clip_norm: t.clip_norm,
            patience: t.patience,
            encoder_dropout: d.encoder,
            predictor_dropout: d.predictor,
            dims: Dims::default(),
            eval_fraction: s.eval_fraction_major,
            small_eval_fraction: s.eval_fraction_minor,
            small_threshold: s.minor_threshold,
            expect_classes: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json { line: source.line(), source })?;
        cfg.train().validate()?;
        cfg.split().validate()?;
        for rate in [cfg.encoder_dropout, cfg.predictor_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(polyphone_core::Error::Config(format!("dropout rate {rate} outside [0, 1)")).into());
            }
        }
        Ok(cfg)
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            seed: self.seed,
            lr0: self.lr0,
            decay_interval: self.decay_interval,
            decay_unit: match self.decay_unit {
                Unit::Epochs => DecayUnit::Epochs,
                Unit::Steps => DecayUnit::Steps,
            },
            decay_factor: self.decay_factor,
            lr_floor: self.lr_floor,
            max_epochs: self.max_epochs,
            clip_norm: self.clip_norm,
            patience: self.patience,
        }
    }

    pub fn split(&self) -> SplitRule {
        SplitRule {
            eval_fraction_major: self.eval_fraction,
            eval_fraction_minor: self.small_eval_fraction,
            minor_threshold: self.small_threshold,
        }
    }

    pub fn dropout(&self) -> DropoutRates {
        DropoutRates { encoder: self.encoder_dropout, predictor: self.predictor_dropout }
    }

    pub fn model_dims(&self, classes: usize) -> ModelDims {
        ModelDims { char_dim: self.dims.char_dim, hidden: self.dims.hidden, fc1: self.dims.fc1, fc2: self.dims.fc2, ..ModelDims::standard(classes) }
    }
}
