use alloc::vec;

use crate::error::{bail, Result};
use crate::numcore::linalg::{gemm, Op};
use crate::numcore::init::{init_params, InitScheme};
use crate::numcore::{Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Fully connected layer `y = act(x Wᵀ + b)` with `W: [out × in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub w: Tensor,
    pub b: Tensor,
    pub activation: Activation,
}

impl DenseParams {
    pub fn new(w: Tensor, b: Tensor, activation: Activation) -> Result<Self> {
        let p = Self { w, b, activation };
        p.validate()?;
        Ok(p)
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(d_in: usize, d_out: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let w = init_params(&[d_out, d_in], InitScheme::UniformGlorot, rng)?;
        let b = Tensor::zeros(&[d_out])?;
        Self::new(w, b, activation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.rank() != 2 {
            bail!(Shape, "dense weight must be rank 2, got {:?}", self.w.shape());
        }
        self.b.expect_shape(&[self.w.dim(0)], "dense bias")
    }

    pub fn d_in(&self) -> usize {
        self.w.dim(1)
    }

    pub fn d_out(&self) -> usize {
        self.w.dim(0)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Tensor::zeros(self.w.shape()).expect("valid shape"),
            b: Tensor::zeros(self.b.shape()).expect("valid shape"),
            activation: self.activation,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let batch = match x.shape() {
            [b, d] if *d == self.d_in() => *b,
            other => bail!(Shape, "dense input {other:?} does not match [B x {}]", self.d_in()),
        };
        let (d_in, d_out) = (self.d_in(), self.d_out());
        let mut y = vec![0.0; batch * d_out];
        gemm(batch, d_in, d_out, 1.0, x.data(), Op::N, self.w.data(), Op::T, 0.0, &mut y);
        for row in y.chunks_exact_mut(d_out) {
            for (v, b) in row.iter_mut().zip(self.b.data()) {
                *v += b;
                if self.activation == Activation::Relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Tensor::from_vec(&[batch, d_out], y)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    ///
    /// `y` is this layer's forward output; for relu the derivative is taken as
    /// `1[y > 0]`.
    pub fn backward(&self, x: &Tensor, y: &Tensor, dy: &Tensor, grads: &mut DenseParams) -> Result<Tensor> {
        let batch = x.dim(0);
        let (d_in, d_out) = (self.d_in(), self.d_out());
        dy.expect_shape(&[batch, d_out], "dense upstream gradient")?;
        let mut dz = dy.clone();
        if self.activation == Activation::Relu {
            for (g, &out) in dz.data_mut().iter_mut().zip(y.data()) {
                if out <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        gemm(d_out, batch, d_in, 1.0, dz.data(), Op::T, x.data(), Op::N, 1.0, grads.w.data_mut());
        for row in dz.data().chunks_exact(d_out) {
            for (gb, g) in grads.b.data_mut().iter_mut().zip(row) {
                *gb += g;
            }
        }
        let mut dx = vec![0.0; batch * d_in];
        gemm(batch, d_out, d_in, 1.0, dz.data(), Op::N, self.w.data(), Op::N, 0.0, &mut dx);
        Tensor::from_vec(&[batch, d_in], dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(activation: Activation) -> DenseParams {
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        DenseParams::new(w, Tensor::zeros(&[2]).unwrap(), activation).unwrap()
    }

    #[test]
    fn identity_and_relu() {
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(identity(Activation::None).forward(&x).unwrap().data(), &[1.0, 2.0]);
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(identity(Activation::Relu).forward(&x).unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn fc1_shape_for_widest_variant() {
        let layer = DenseParams::init(812, 512, Activation::Relu, &mut Rng::new(0)).unwrap();
        let y = layer.forward(&Tensor::zeros(&[2, 812]).unwrap()).unwrap();
        assert_eq!(y.shape(), &[2, 512]);
    }

    #[test]
    fn rejects_width_mismatch() {
        let layer = identity(Activation::None);
        assert!(layer.forward(&Tensor::zeros(&[1, 3]).unwrap()).is_err());
    }
}
