//! Conditional BLSTM polyphone disambiguation for Mandarin TTS front-ends.
//!
//! Given a sentence and the position of a polyphonic character, the network
//! concatenates the character's embedding with a word-level condition (a
//! frozen pre-trained word vector), a sentence-level condition (the BLSTM
//! output at the character's position), or both, and classifies the result
//! over the full pinyin inventory.
//!
//! This crate is `no_std` + `alloc`: it holds the numerics, data model,
//! training loop and metrics. File formats and the command line live in the
//! `polyphone` crate.
//!
//! # Features
//! - `std`: lets the matrix kernels use threads.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod numcore;
pub mod train;

pub use corpus::{Batch, EncodedSample, Lexicon, Sample, SplitRule};
pub use error::{Error, Result};
pub use features::{CharVocab, MaxMatchSegmenter, Segmenter, WordVecStore};
pub use model::{Model, ModelDims, ModelParams, Variant};
pub use numcore::{Rng, Tensor};
pub use train::{fit, TrainConfig};
