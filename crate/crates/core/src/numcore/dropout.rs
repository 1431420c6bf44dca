use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::numcore::{Rng, Tensor};

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        bail!(Config, "dropout rate {rate} outside [0, 1)");
    }
    Ok(())
}

/// Inverted-dropout multipliers: each entry is `0` with probability `rate`
/// and `1 / (1 - rate)` otherwise. `None` means identity.
pub fn dropout_mask(len: usize, rate: f64, training: bool, rng: &mut Rng) -> Result<Option<Vec<f64>>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Some((0..len).map(|_| if rng.unit() < rate { 0.0 } else { keep }).collect()))
}

pub fn apply_mask(values: &mut [f64], mask: Option<&[f64]>) {
    if let Some(mask) = mask {
        values.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    }
}

pub fn dropout(x: &Tensor, rate: f64, training: bool, rng: &mut Rng) -> Result<Tensor> {
    let mask = dropout_mask(x.len(), rate, training, rng)?;
    let mut out = x.clone();
    apply_mask(out.data_mut(), mask.as_deref());
    Ok(out)
}
