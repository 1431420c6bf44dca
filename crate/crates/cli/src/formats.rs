//! Text file formats: lexicon TSV, corpus JSONL, word2vec text vectors and
//! plain word lists.

use std::fs;
use std::io::Write;
use std::path::Path;

use polyphone_core::corpus::{Lexicon, Sample};
use polyphone_core::features::{WordVecStore, WORD_DIM};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_err(line: usize, message: impl std::fmt::Display) -> Error {
    Error::format(format!("line {line}: {message}"))
}

/// Parses `<char>\t<pinyin>[,<pinyin>...]` lines. Blank lines are skipped.
pub fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeMap::new();
    for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let Some((ch, pinyins)) = line.split_once('\t') else {
            return Err(format_err(n, "expected <char>\\t<pinyins>"));
        };
        let mut chars = ch.chars();
        let (Some(ch), None) = (chars.next(), chars.next()) else {
            return Err(format_err(n, format!("{ch:?} is not a single character")));
        };
        if let Some(first) = seen.insert(ch, n) {
            return Err(format_err(n, format!("duplicate character {ch} (first on line {first})")));
        }
        let candidates: Vec<&str> = pinyins.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        if candidates.is_empty() {
            return Err(format_err(n, format!("no candidates for {ch}")));
        }
        entries.push((ch, candidates));
    }
    Ok(Lexicon::from_entries(entries)?)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    parse_lexicon(&read(path.as_ref())?)
}

pub fn lexicon_to_tsv(lexicon: &Lexicon) -> String {
    let mut out = String::new();
    for (ch, classes) in lexicon.entries() {
        let list: Vec<&str> = classes.iter().map(|&c| lexicon.pinyin(c)).collect();
        out.push_str(&format!("{ch}\t{}\n", list.join(",")));
    }
    out
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub text: String,
    pub index: usize,
    pub pinyin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<[usize; 2]>,
}

impl CorpusRecord {
    pub fn from_sample(sample: &Sample, lexicon: &Lexicon) -> Self {
        Self {
            text: sample.text(),
            index: sample.target,
            pinyin: lexicon.pinyin(sample.gold).to_string(),
            word: sample.word_span.map(|(s, e)| [s, e]),
        }
    }
}

/// Parses JSON-lines annotations, validating each against the lexicon.
pub fn parse_corpus(text: &str, lexicon: &Lexicon) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(line).map_err(|source| Error::Json { line: n, source })?;
        let span = record.word.map(|[s, e]| (s, e));
        let sample = Sample::annotated(&record.text, record.index, &record.pinyin, span, lexicon)
            .map_err(|e| polyphone_core::Error::Annotation { line: n, message: e.to_string() })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn load_corpus(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<Vec<Sample>> {
    parse_corpus(&read(path.as_ref())?, lexicon)
}

pub fn corpus_to_jsonl(samples: &[Sample], lexicon: &Lexicon) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(&CorpusRecord::from_sample(s, lexicon)).expect("plain record"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, samples: &[Sample], lexicon: &Lexicon) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, corpus_to_jsonl(samples, lexicon)).map_err(|e| Error::io(path, e))
}

/// Parses word2vec text: a `<count> <dim>` header, then `<token> <f1> … <f_dim>`.
/// Later duplicates replace earlier ones with a warning.
pub fn parse_word_vectors(text: &str) -> Result<WordVecStore> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::format("empty word-vector file"));
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [count, dim] = fields.as_slice() else {
        return Err(format_err(1, "header must be <count> <dim>"));
    };
    let count: usize = count.parse().map_err(|_| format_err(1, format!("bad count {count:?}")))?;
    let dim: usize = dim.parse().map_err(|_| format_err(1, format!("bad dimension {dim:?}")))?;
    if dim != WORD_DIM {
        return Err(polyphone_core::Error::Config(format!("word vectors have dimension {dim}, expected {WORD_DIM}")).into());
    }
    let mut store = WordVecStore::new();
    let mut read = 0;
    let mut values = Vec::with_capacity(dim);
    for (n, line) in lines {
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line");
        values.clear();
        for v in parts {
            values.push(v.parse::<f64>().map_err(|_| format_err(n, format!("malformed float {v:?}")))?);
        }
        if values.len() != dim {
            return Err(format_err(n, format!("{token:?} has {} values, expected {dim}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(n, format!("non-finite value for {token:?}")));
        }
        if store.insert(token, &values)? {
            log::warn!("line {n}: duplicate token {token:?}, keeping the later vector");
        }
        read += 1;
    }
    if read != count {
        return Err(Error::format(format!("header announces {count} vectors, file has {read}")));
    }
    Ok(store)
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVecStore> {
    parse_word_vectors(&read(path.as_ref())?)
}

pub fn write_word_vectors(path: impl AsRef<Path>, store: &WordVecStore) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", store.len(), WORD_DIM).map_err(io)?;
    for (row, token) in store.tokens().iter().enumerate() {
        write!(w, "{token}").map_err(io)?;
        for v in store.vector(row) {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One word per line; blank lines ignored.
pub fn load_word_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(read(path.as_ref())?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}
