//! File formats, checkpoints, reports and the `polyphone` command line on
//! top of `polyphone-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod formats;
pub mod history;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
