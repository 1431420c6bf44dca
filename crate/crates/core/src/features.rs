//! Character vocabulary, word segmentation and the pre-trained word-vector
//! condition store.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{EncodedSample, Sample, PAD_CHAR};
use crate::error::{bail, Result};
use crate::numcore::Tensor;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
/// Width of the pre-trained word vectors.
pub const WORD_DIM: usize = 200;

/// Character → id, with 0 reserved for padding and 1 for unknown characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    ids: BTreeMap<char, u32>,
}

impl CharVocab {
    /// Known characters in id order starting at id 2. Duplicates and the pad
    /// symbol are dropped.
    pub fn from_chars<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut list = Vec::new();
        let mut ids = BTreeMap::new();
        for ch in chars {
            if ch == PAD_CHAR || ids.contains_key(&ch) {
                continue;
            }
            ids.insert(ch, list.len() as u32 + 2);
            list.push(ch);
        }
        Self { chars: list, ids }
    }

    /// Every character of the training text, ordered by code point.
    pub fn build(train: &[Sample]) -> Self {
        let set: BTreeSet<char> = train.iter().flat_map(|s| s.chars.iter().copied()).collect();
        Self::from_chars(set)
    }

    /// `N_c`, including the two reserved ids.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, ch: char) -> u32 {
        if ch == PAD_CHAR {
            return UNK_ID;
        }
        self.ids.get(&ch).copied().unwrap_or(UNK_ID)
    }

    /// Characters with ids `2..len()`, in id order.
    pub fn known(&self) -> &[char] {
        &self.chars
    }

    pub fn encode(&self, chars: &[char]) -> Vec<u32> {
        chars.iter().map(|&c| self.id(c)).collect()
    }
}

/// Gathers embedding rows: `ids: [B × L]` → `[B × L × D]`.
pub fn embed_chars(ids: &[u32], batch: usize, steps: usize, table: &Tensor) -> Result<Tensor> {
    if ids.len() != batch * steps {
        bail!(Shape, "{} ids for a [{batch} x {steps}] grid", ids.len());
    }
    let (rows, dim) = (table.dim(0), table.dim(1));
    let mut out = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        if id as usize >= rows {
            bail!(Index, "character id {id} outside embedding table of {rows} rows");
        }
        out.extend_from_slice(table.row(id as usize));
    }
    Tensor::from_vec(&[batch, steps, dim], out)
}

/// Frozen token → 200-dimensional vector table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WordVecStore {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl WordVecStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a vector; returns `true` when an existing token was replaced.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != WORD_DIM {
            bail!(Config, "word vector for {token:?} has {} values, expected {WORD_DIM}", vector.len());
        }
        if let Some(&row) = self.index.get(token) {
            self.data[row * WORD_DIM..(row + 1) * WORD_DIM].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(token.into(), self.tokens.len());
        self.tokens.push(token.into());
        self.data.extend_from_slice(vector);
        Ok(false)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.data[row * WORD_DIM..(row + 1) * WORD_DIM]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.lookup(token).map(|r| self.vector(r))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rows for `words`, zero where the lookup missed: `[B × 200]`.
    pub fn gather(&self, words: &[Option<usize>]) -> Result<Tensor> {
        let mut out = alloc::vec![0.0; words.len() * WORD_DIM];
        for (slot, word) in out.chunks_exact_mut(WORD_DIM).zip(words) {
            if let Some(row) = *word {
                if row >= self.len() {
                    bail!(Index, "word row {row} outside store of {}", self.len());
                }
                slot.copy_from_slice(self.vector(row));
            }
        }
        Tensor::from_vec(&[words.len().max(1), WORD_DIM], out)
    }
}

/// Half-open character span `[start, end)`.
pub type Span = (usize, usize);

/// Tiles a sentence into word spans.
pub trait Segmenter {
    fn segment(&self, chars: &[char]) -> Vec<Span>;
}

/// Greedy forward longest-match over a word dictionary.
#[derive(Clone, Debug, Default)]
pub struct MaxMatchSegmenter {
    words: BTreeSet<Vec<char>>,
    max_len: usize,
}

impl MaxMatchSegmenter {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<Vec<char>> = words.into_iter().map(|w| w.as_ref().chars().collect::<Vec<_>>()).filter(|w| !w.is_empty()).collect();
        let max_len = words.iter().map(Vec::len).max().unwrap_or(0);
        Self { words, max_len }
    }

    pub fn from_store(store: &WordVecStore) -> Self {
        Self::new(store.tokens())
    }
}

impl Segmenter for MaxMatchSegmenter {
    fn segment(&self, chars: &[char]) -> Vec<Span> {
        let mut spans = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let longest = self.max_len.min(chars.len() - start);
            let len = (2..=longest).rev().find(|&n| self.words.contains(&chars[start..start + n])).unwrap_or(1);
            spans.push((start, start + len));
            start += len;
        }
        spans
    }
}

/// Convenience wrapper over [`Segmenter::segment`].
pub fn segment(sentence: &str, segmenter: &dyn Segmenter) -> Vec<Span> {
    let chars: Vec<char> = sentence.chars().collect();
    segmenter.segment(&chars)
}

/// The span containing the sample's target: its own annotation when present,
/// otherwise the segmenter's.
pub fn containing_span(sample: &Sample, segmenter: &dyn Segmenter) -> Span {
    if let Some(span) = sample.word_span {
        return span;
    }
    segmenter
        .segment(&sample.chars)
        .into_iter()
        .find(|&(s, e)| s <= sample.target && sample.target < e)
        .unwrap_or((sample.target, sample.target + 1))
}

/// Store row of the word containing the target, `None` on a miss.
pub fn word_lookup(sample: &Sample, segmenter: &dyn Segmenter, store: &WordVecStore) -> Option<usize> {
    let (start, end) = containing_span(sample, segmenter);
    let word: String = sample.chars[start..end].iter().collect();
    store.lookup(&word)
}

/// The 200-dimensional word-level condition; zero when the lookup missed.
pub fn word_condition(sample: &Sample, segmenter: &dyn Segmenter, store: &WordVecStore) -> Tensor {
    let data = match word_lookup(sample, segmenter, store) {
        Some(row) => store.vector(row).to_vec(),
        None => alloc::vec![0.0; WORD_DIM],
    };
    Tensor::from_vec(&[WORD_DIM], data).expect("fixed width")
}

/// Everything needed to turn [`Sample`]s into [`EncodedSample`]s.
pub struct Featurizer<'a> {
    pub vocab: &'a CharVocab,
    pub words: Option<(&'a WordVecStore, &'a dyn Segmenter)>,
}

impl Featurizer<'_> {
    pub fn encode(&self, sample: &Sample) -> EncodedSample {
        EncodedSample {
            char_ids: self.vocab.encode(&sample.chars),
            target: sample.target,
            word: self.words.and_then(|(store, seg)| word_lookup(sample, seg, store)),
            gold: sample.gold,
        }
    }

    pub fn encode_all(&self, samples: &[Sample]) -> Vec<EncodedSample> {
        samples.iter().map(|s| self.encode(s)).collect()
    }
}
