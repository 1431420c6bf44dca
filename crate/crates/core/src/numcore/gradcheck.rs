//! Central finite-difference gradient oracle.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::numcore::{Rng, Tensor};

/// Anything exposing an ordered, named list of parameter tensors.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));
}

impl Parameters for Tensor {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("tensor", self)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("tensor", self)
    }
}

impl Parameters for Vec<Tensor> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, t) in self.iter().enumerate() {
            f(&alloc::format!("{i}"), t);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, t) in self.iter_mut().enumerate() {
            f(&alloc::format!("{i}"), t);
        }
    }
}

/// Differences below this are treated as agreement regardless of scale.
pub const ABS_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|)`, or zero when `|a - n|` is under [`ABS_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = libm::fabs(analytic - numeric);
    if diff < ABS_FLOOR {
        return 0.0;
    }
    diff / libm::fabs(analytic).max(libm::fabs(numeric))
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many randomly chosen elements per tensor.
    pub sample_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-5, sample_per_tensor: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Probes whose two sides fell in different linear regions (see [`grad_check_regions`]).
    pub skipped: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_abs_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compares `analytic` (same layout as `params`) against central differences
/// of `loss`. `params` is restored exactly after every probe.
pub fn grad_check<P, F>(params: &mut P, analytic: &P, opts: &GradCheckOptions, mut loss: F) -> Result<GradCheckReport>
where
    P: Parameters + ?Sized,
    F: FnMut(&P) -> Result<f64>,
{
    grad_check_regions(params, analytic, opts, |p| Ok((loss(p)?, 0)))
}

/// Like [`grad_check`], but `loss` also returns a fingerprint of the
/// piecewise-linear region it was evaluated in (for example the on/off
/// pattern of every ReLU). A probe whose `+eps` and `-eps` sides disagree
/// straddles a kink, where the central difference is meaningless; it is
/// skipped and counted instead of compared.
pub fn grad_check_regions<P, F>(params: &mut P, analytic: &P, opts: &GradCheckOptions, mut loss: F) -> Result<GradCheckReport>
where
    P: Parameters + ?Sized,
    F: FnMut(&P) -> Result<(f64, u64)>,
{
    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    analytic.visit(&mut |name, t| grads.push((name.to_string(), t.data().to_vec())));
    let mut sizes = Vec::new();
    params.visit(&mut |_, t| sizes.push(t.len()));
    if sizes.len() != grads.len() || sizes.iter().zip(&grads).any(|(n, g)| *n != g.1.len()) {
        bail!(Shape, "gradient layout does not match parameters");
    }
    let mut rng = Rng::new(opts.seed);
    let mut tensors = Vec::with_capacity(grads.len());
    for (ti, (name, grad)) in grads.iter().enumerate() {
        let elements: Vec<usize> = match opts.sample_per_tensor {
            Some(n) if n < grad.len() => (0..n).map(|_| rng.below(grad.len())).collect(),
            _ => (0..grad.len()).collect(),
        };
        let mut worst: f64 = 0.0;
        let mut worst_abs: f64 = 0.0;
        let mut skipped = 0;
        for &e in &elements {
            let original = {
                let mut v = 0.0;
                let mut k = 0;
                params.visit(&mut |_, t| {
                    if k == ti {
                        v = t.data()[e];
                    }
                    k += 1;
                });
                v
            };
            set(params, ti, e, original + opts.eps);
            let plus = loss(params);
            set(params, ti, e, original - opts.eps);
            let minus = loss(params);
            set(params, ti, e, original);
            let ((plus, region_plus), (minus, region_minus)) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                bail!(Numeric, "non-finite loss while probing {name}[{e}]");
            }
            if region_plus != region_minus {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.eps);
            worst = worst.max(relative_error(grad[e], numeric));
            worst_abs = worst_abs.max(libm::fabs(grad[e] - numeric));
        }
        tensors.push(TensorCheck { name: name.clone(), checked: elements.len() - skipped, skipped, max_rel_error: worst, max_abs_error: worst_abs });
    }
    Ok(GradCheckReport { tensors })
}

fn set<P: Parameters + ?Sized>(params: &mut P, tensor: usize, element: usize, value: f64) {
    let mut k = 0;
    params.visit_mut(&mut |_, t| {
        if k == tensor {
            t.data_mut()[element] = value;
        }
        k += 1;
    });
}
