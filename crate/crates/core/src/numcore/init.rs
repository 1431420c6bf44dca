use crate::error::Result;
use crate::numcore::{Rng, Tensor};

/// Parameter initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
    UniformGlorot,
    Zeros,
}

/// Fan-in and fan-out for a `[out × in...]` weight; rank-1 tensors use their length for both.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [out, rest @ ..] => (rest.iter().product(), *out),
        [] => (0, 0),
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

pub fn init_params(shape: &[usize], scheme: InitScheme, rng: &mut Rng) -> Result<Tensor> {
    let mut t = Tensor::zeros(shape)?;
    if scheme == InitScheme::UniformGlorot {
        let (fan_in, fan_out) = fans(shape);
        let r = glorot_bound(fan_in, fan_out);
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-r, r));
    }
    Ok(t)
}
