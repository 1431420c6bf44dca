//! The finite-difference gradient suite behind `polyphone gradcheck`.

use polyphone_core::corpus::{Batch, EncodedSample};
use polyphone_core::features::{WordVecStore, PAD_ID, WORD_DIM};
use polyphone_core::model::{forward, loss_and_gradients, ModelDims, ModelParams, Variant};
use polyphone_core::numcore::{grad_check_regions, softmax_cross_entropy, GradCheckOptions, GradCheckReport};
use polyphone_core::{Result, Rng, Tensor};

/// Passing threshold for the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;

/// Small enough that every element can be perturbed.
pub fn reduced_dims(classes: usize) -> ModelDims {
    ModelDims { char_dim: 5, word_dim: WORD_DIM, hidden: 4, fc1: 6, fc2: 7, classes }
}

#[derive(Debug, Clone)]
pub struct VariantCheck {
    pub variant: Variant,
    pub dims: ModelDims,
    pub report: GradCheckReport,
}

impl VariantCheck {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error() < TOLERANCE && self.checked() > 0
    }

    pub fn checked(&self) -> usize {
        self.report.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.report.tensors.iter().map(|t| t.skipped).sum()
    }
}

/// A two-sample batch of unequal length; the first sample has a word vector,
/// the second misses the store.
pub fn two_sample_batch(vocab_size: usize, classes: usize, rng: &mut Rng) -> Result<(Batch, WordVecStore)> {
    let mut store = WordVecStore::new();
    let v: Vec<f64> = (0..WORD_DIM).map(|_| rng.uniform(-1.0, 1.0)).collect();
    store.insert("w", &v)?;
    let mut ids = |n: usize| -> Vec<u32> { (0..n).map(|_| 1 + rng.below(vocab_size - 1) as u32).collect() };
    let samples = [
        EncodedSample { char_ids: ids(7), target: 4, word: Some(0), gold: 1 % classes },
        EncodedSample { char_ids: ids(4), target: 1, word: None, gold: classes - 1 },
    ];
    Ok((Batch::from_samples(samples.iter(), PAD_ID)?, store))
}

/// FNV-1a hash of which ReLU units are active.
fn relu_pattern(outputs: &[&Tensor]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in outputs.iter().flat_map(|t| t.data()) {
        h ^= u64::from(*v > 0.0);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Checks one variant with random parameters and dropout off.
pub fn check_variant(variant: Variant, dims: ModelDims, vocab_size: usize, opts: &GradCheckOptions) -> Result<VariantCheck> {
    let mut rng = Rng::with_stream(opts.seed, u64::from(variant.tag()));
    let (batch, store) = two_sample_batch(vocab_size, dims.classes, &mut rng)?;
    let mut params = ModelParams::init(variant, dims, vocab_size, &mut rng)?;
    let (_, grads, _) = loss_and_gradients(&batch, &params, Some(&store), false, &mut rng)?;
    let report = grad_check_regions(&mut params, &grads, opts, |p| {
        let (logits, cache) = forward(&batch, p, Some(&store), false, &mut Rng::new(0))?;
        let region = relu_pattern(&[cache.predictor.fc1_output(), cache.predictor.fc2_output()]);
        Ok((softmax_cross_entropy(&logits, &batch.gold)?.0, region))
    })?;
    Ok(VariantCheck { variant, dims: params.dims, report })
}

/// Every variant at reduced widths with every element checked, plus (with
/// `full`) a sampled check at the standard widths.
pub fn gradient_suite(seed: u64, full: bool) -> Result<Vec<VariantCheck>> {
    let mut out = Vec::new();
    let exhaustive = GradCheckOptions { seed, ..GradCheckOptions::default() };
    for v in Variant::ALL {
        out.push(check_variant(v, reduced_dims(4), 9, &exhaustive)?);
    }
    if full {
        let sampled = GradCheckOptions { sample_per_tensor: Some(20), seed, ..GradCheckOptions::default() };
        for v in Variant::ALL {
            out.push(check_variant(v, ModelDims::standard(285), 12, &sampled)?);
        }
    }
    Ok(out)
}
