//! Deterministic numeric kernel: tensors, layers with hand-derived
//! gradients, loss, initialization, dropout and a finite-difference oracle.

pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod linalg;
pub mod loss;
pub mod lstm;
mod rng;
mod tensor;

pub use dense::{Activation, DenseParams};
pub use dropout::dropout;
pub use gradcheck::{grad_check, grad_check_regions, GradCheckOptions, GradCheckReport, Parameters};
pub use init::{init_params, InitScheme};
pub use loss::{argmax, cross_entropy, softmax, softmax_cross_entropy};
pub use lstm::{LstmParams, LstmTrace};
pub use rng::Rng;
pub use tensor::Tensor;
