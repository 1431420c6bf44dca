use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};

/// Dense row-major `f64` array with shape metadata.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        bail!(Shape, "empty shape");
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        bail!(Shape, "dimension {pos} of {shape:?} is zero");
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![0.0; len] })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = checked_len(shape)?;
        if data.len() != len {
            bail!(Shape, "shape {shape:?} needs {len} values, got {}", data.len());
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.fill(value);
        Ok(t)
    }

    /// Shorthand for a rank-1 tensor. Panics on an empty slice.
    pub fn vector(values: &[f64]) -> Self {
        Self::from_vec(&[values.len()], values.to_vec()).expect("non-empty vector")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Size of dimension `axis`.
    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    /// Row `i` of a rank-2 tensor, or the `i`-th leading slice of any tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.data.len() / self.shape[0];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let width = self.data.len() / self.shape[0];
        &mut self.data[i * width..(i + 1) * width]
    }

    pub fn expect_shape(&self, expected: &[usize], what: &str) -> Result<()> {
        if self.shape != expected {
            bail!(Shape, "{what}: expected {expected:?}, got {:?}", self.shape);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            bail!(Shape, "axpy: {:?} vs {:?}", self.shape, other.shape);
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?}", self.shape)?;
        f.debug_list().entries(self.data.iter().take(SHOWN)).finish()?;
        if self.data.len() > SHOWN {
            write!(f, "..")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims() {
        assert!(Tensor::zeros(&[2, 0]).is_err());
        assert!(Tensor::zeros(&[]).is_err());
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn rows_are_leading_slices() {
        let t = Tensor::from_vec(&[2, 2, 2], (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[4.0, 5.0, 6.0, 7.0]);
    }
}
