use alloc::format;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::numcore::Tensor;

/// Probability floor applied before the log in [`cross_entropy`].
pub const LOG_CLAMP: f64 = 1e-12;

fn as_matrix(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [b, k] => Ok((*b, *k)),
        other => bail!(Shape, "{what}: expected rank-2 tensor, got {other:?}"),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    as_matrix(logits, "softmax")?;
    let mut out = logits.clone();
    for b in 0..logits.dim(0) {
        let row = out.row_mut(b);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

fn check_targets(targets: &[usize], batch: usize, classes: usize) -> Result<()> {
    if targets.len() != batch {
        bail!(Shape, "{} targets for a batch of {batch}", targets.len());
    }
    if let Some((b, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= classes) {
        return Err(Error::Index(format!("target {t} of row {b} outside [0, {classes})")));
    }
    Ok(())
}

/// Mean negative log-likelihood of `targets` under `probs`.
pub fn cross_entropy(probs: &Tensor, targets: &[usize]) -> Result<f64> {
    let (batch, classes) = as_matrix(probs, "cross_entropy")?;
    check_targets(targets, batch, classes)?;
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(b, &t)| -libm::log(probs.row(b)[t].max(LOG_CLAMP)))
        .sum();
    Ok(total / batch as f64)
}

/// Loss and logit gradient of `cross_entropy ∘ softmax`: `(probs - onehot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let probs = softmax(logits)?;
    let loss = cross_entropy(&probs, targets)?;
    let batch = logits.dim(0);
    let mut grad = probs.clone();
    for (b, &t) in targets.iter().enumerate() {
        grad.row_mut(b)[t] -= 1.0;
    }
    grad.scale(1.0 / batch as f64);
    Ok((loss, probs, grad))
}

/// Index of the row maximum; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.dim(0)).map(|b| argmax(t.row(b))).collect()
}
