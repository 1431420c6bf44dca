//! Lexicon, annotated samples, stratified splitting and per-batch padding.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::numcore::Rng;

/// Reserved pad symbol; never part of real text.
pub const PAD_CHAR: char = '|';

fn valid_pinyin(p: &str) -> bool {
    let mut chars = p.chars().rev();
    matches!(chars.next(), Some('1'..='5')) && {
        let body: Vec<char> = chars.collect();
        !body.is_empty() && body.iter().all(|c| c.is_alphabetic())
    }
}

/// Character → ordered candidate pinyins, plus the class inventory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<char, Vec<usize>>,
    inventory: Vec<String>,
    classes: BTreeMap<String, usize>,
}

impl Lexicon {
    /// Builds a lexicon; the inventory is every distinct candidate in
    /// lexicographic order.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (char, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut raw: BTreeMap<char, Vec<String>> = BTreeMap::new();
        for (ch, candidates) in entries {
            if candidates.is_empty() {
                bail!(Format, "character {ch} has no candidate pinyin");
            }
            let mut list: Vec<String> = Vec::with_capacity(candidates.len());
            for c in candidates {
                let c = c.as_ref().trim();
                if !valid_pinyin(c) {
                    bail!(Format, "malformed pinyin {c:?} for {ch}");
                }
                if !list.iter().any(|p| p == c) {
                    list.push(c.to_string());
                }
            }
            if raw.insert(ch, list).is_some() {
                bail!(Format, "duplicate entry for character {ch}");
            }
        }
        let mut inventory: Vec<String> = raw.values().flatten().cloned().collect();
        inventory.sort();
        inventory.dedup();
        let classes: BTreeMap<String, usize> = inventory.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let entries = raw
            .into_iter()
            .map(|(ch, list)| (ch, list.iter().map(|p| classes[p]).collect()))
            .collect();
        Ok(Self { entries, inventory, classes })
    }

    /// Rebuilds a lexicon from an explicit inventory and class-index entries.
    pub fn from_classes(inventory: Vec<String>, entries: Vec<(char, Vec<usize>)>) -> Result<Self> {
        if inventory.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Format, "pinyin inventory must be strictly sorted");
        }
        let mut map = BTreeMap::new();
        for (ch, list) in entries {
            if list.is_empty() || list.iter().any(|&c| c >= inventory.len()) {
                bail!(Format, "bad candidate classes for {ch}");
            }
            if map.insert(ch, list).is_some() {
                bail!(Format, "duplicate entry for character {ch}");
            }
        }
        let classes = inventory.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Ok(Self { entries: map, inventory, classes })
    }

    pub fn num_classes(&self) -> usize {
        self.inventory.len()
    }

    pub fn inventory(&self) -> &[String] {
        &self.inventory
    }

    pub fn pinyin(&self, class: usize) -> &str {
        &self.inventory[class]
    }

    pub fn class_of(&self, pinyin: &str) -> Option<usize> {
        self.classes.get(pinyin).copied()
    }

    pub fn candidate_classes(&self, ch: char) -> Option<&[usize]> {
        self.entries.get(&ch).map(Vec::as_slice)
    }

    pub fn candidates(&self, ch: char) -> Option<Vec<&str>> {
        self.candidate_classes(ch).map(|cs| cs.iter().map(|&c| self.pinyin(c)).collect())
    }

    pub fn contains(&self, ch: char) -> bool {
        self.entries.contains_key(&ch)
    }

    pub fn is_polyphonic(&self, ch: char) -> bool {
        self.entries.get(&ch).is_some_and(|c| c.len() > 1)
    }

    pub fn entries(&self) -> impl Iterator<Item = (char, &[usize])> {
        self.entries.iter().map(|(c, l)| (*c, l.as_slice()))
    }
}

/// One annotated polyphonic character in its sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub chars: Vec<char>,
    pub target: usize,
    /// Containing word as a half-open span, when the annotation carries one.
    pub word_span: Option<(usize, usize)>,
    pub gold: usize,
}

impl Sample {
    /// Validates an annotation against the lexicon.
    pub fn annotated(text: &str, target: usize, pinyin: &str, word_span: Option<(usize, usize)>, lexicon: &Lexicon) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let Some(&ch) = chars.get(target) else {
            bail!(Index, "index {target} outside sentence of {} characters", chars.len());
        };
        let Some(candidates) = lexicon.candidate_classes(ch) else {
            bail!(Domain, "character {ch} is not in the lexicon");
        };
        if !lexicon.is_polyphonic(ch) {
            bail!(Domain, "character {ch} is not polyphonic");
        }
        let gold = match lexicon.class_of(pinyin) {
            Some(c) if candidates.contains(&c) => c,
            _ => bail!(Domain, "pinyin {pinyin} is not a candidate of {ch}"),
        };
        if let Some((start, end)) = word_span {
            if !(start <= target && target < end && end <= chars.len()) {
                bail!(Index, "word span [{start}, {end}) does not contain index {target}");
            }
        }
        Ok(Self { chars, target, word_span, gold })
    }

    pub fn target_char(&self) -> char {
        self.chars[self.target]
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Stratification key: (character, gold class).
    pub fn pair(&self) -> (char, usize) {
        (self.target_char(), self.gold)
    }
}

/// Per (character, pinyin) pair eval fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRule {
    pub eval_fraction_major: f64,
    pub eval_fraction_minor: f64,
    /// Pairs with fewer samples than this use the minor fraction.
    pub minor_threshold: usize,
}

impl Default for SplitRule {
    fn default() -> Self {
        Self { eval_fraction_major: 0.07, eval_fraction_minor: 0.20, minor_threshold: 15 }
    }
}

impl SplitRule {
    pub fn validate(&self) -> Result<()> {
        for f in [self.eval_fraction_major, self.eval_fraction_minor] {
            if !(f > 0.0 && f < 1.0) {
                bail!(Config, "eval fraction {f} outside (0, 1)");
            }
        }
        Ok(())
    }

    /// Eval share of a pair with `count` samples, rounded half away from zero.
    pub fn eval_count(&self, count: usize) -> usize {
        let fraction = if count >= self.minor_threshold { self.eval_fraction_major } else { self.eval_fraction_minor };
        libm::round(fraction * count as f64) as usize
    }
}

/// Stratified split over (character, gold) pairs. Returns `(train, eval)`,
/// each in corpus order.
pub fn split_dataset(samples: &[Sample], rule: &SplitRule, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    rule.validate()?;
    let mut groups: BTreeMap<(char, usize), Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.pair()).or_default().push(i);
    }
    let mut rng = Rng::new(seed);
    let mut in_eval = alloc::vec![false; samples.len()];
    for members in groups.values_mut() {
        let n = rule.eval_count(members.len());
        rng.shuffle(members);
        for &i in &members[..n] {
            in_eval[i] = true;
        }
    }
    let (eval, train): (Vec<_>, Vec<_>) = samples.iter().cloned().zip(in_eval).partition(|(_, e)| *e);
    Ok((train.into_iter().map(|p| p.0).collect(), eval.into_iter().map(|p| p.0).collect()))
}

/// Numeric form of a [`Sample`] ready for batching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSample {
    pub char_ids: Vec<u32>,
    pub target: usize,
    /// Row of the word-vector store, `None` when the lookup missed.
    pub word: Option<usize>,
    pub gold: usize,
}

/// A padded minibatch. `char_ids` is row-major `[B × max_len]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub char_ids: Vec<u32>,
    pub max_len: usize,
    pub lengths: Vec<usize>,
    pub targets: Vec<usize>,
    pub words: Vec<Option<usize>>,
    pub gold: Vec<usize>,
}

impl Batch {
    /// Pads `samples` to their longest member.
    pub fn from_samples<'a, I>(samples: I, pad_id: u32) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EncodedSample>,
        I::IntoIter: Clone,
    {
        let iter = samples.into_iter();
        let max_len = iter.clone().map(|s| s.char_ids.len()).max().unwrap_or(0);
        if max_len == 0 {
            bail!(Shape, "cannot batch empty sentences");
        }
        let mut batch = Batch {
            char_ids: Vec::new(),
            max_len,
            lengths: Vec::new(),
            targets: Vec::new(),
            words: Vec::new(),
            gold: Vec::new(),
        };
        for s in iter {
            if s.target >= s.char_ids.len() {
                return Err(Error::Index(alloc::format!("target {} outside sentence of {}", s.target, s.char_ids.len())));
            }
            batch.char_ids.extend_from_slice(&s.char_ids);
            batch.char_ids.extend(core::iter::repeat(pad_id).take(max_len - s.char_ids.len()));
            batch.lengths.push(s.char_ids.len());
            batch.targets.push(s.target);
            batch.words.push(s.word);
            batch.gold.push(s.gold);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn row(&self, b: usize) -> &[u32] {
        &self.char_ids[b * self.max_len..(b + 1) * self.max_len]
    }

    /// Character id at each row's target position.
    pub fn target_ids(&self) -> Vec<u32> {
        (0..self.len()).map(|b| self.row(b)[self.targets[b]]).collect()
    }
}

/// Splits `samples` into batches of at most `batch_size`, each padded to its
/// own longest sentence. Order is corpus order unless `shuffle`.
pub fn make_batches(samples: &[EncodedSample], batch_size: usize, pad_id: u32, seed: u64, shuffle: bool) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        bail!(Config, "batch size must be positive");
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if shuffle {
        Rng::new(seed).shuffle(&mut order);
    }
    order
        .chunks(batch_size)
        .map(|chunk| Batch::from_samples(chunk.iter().map(|&i| &samples[i]), pad_id))
        .collect()
}
