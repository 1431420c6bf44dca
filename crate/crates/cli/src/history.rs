//! Training history as JSON lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use polyphone_core::train::HistoryRow;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub eval_acc: f64,
}

impl From<&HistoryRow> for HistoryRecord {
    fn from(r: &HistoryRow) -> Self {
        Self { epoch: r.epoch, lr: r.lr, loss: r.loss, eval_acc: r.eval_acc }
    }
}

/// Appends one line per epoch and flushes, so a killed run keeps its history.
pub struct HistoryWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl HistoryWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, out: BufWriter::new(file) })
    }

    pub fn write(&mut self, row: &HistoryRow) -> Result<()> {
        let line = serde_json::to_string(&HistoryRecord::from(row)).expect("plain record");
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(|e| Error::io(&self.path, e))
    }
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| Error::Json { line: i + 1, source }))
        .collect()
}
