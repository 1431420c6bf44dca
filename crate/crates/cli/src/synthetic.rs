//! Synthetic corpus with two planted pronunciation rules:
//!
//! * word family: 将 forms a two-character word with a partner character and
//!   the partner's class decides jiang1 or jiang4. Each word's vector is its
//!   class centroid plus noise, so unseen partners still carry the signal
//!   through the word vector but not through the characters.
//! * cue family: 得 stands alone and a cue character 3 to 5 positions to its
//!   left decides de2 or dei3. The word vector of 得 is constant.

use polyphone_core::corpus::{EncodedSample, Lexicon, Sample};
use polyphone_core::features::{CharVocab, Featurizer, MaxMatchSegmenter, WordVecStore, WORD_DIM};
use polyphone_core::Rng;

pub const WORD_TARGET: char = '将';
pub const CUE_TARGET: char = '得';
/// Cues preceding 得 read as dei3.
pub const DEI_CUES: [char; 3] = ['必', '需', '只'];
/// Cues preceding 得 read as de2.
pub const DE_CUES: [char; 3] = ['获', '取', '失'];

const FILLER_BASE: u32 = 0x4E00;
const PARTNER_BASE: u32 = 0x6C00;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Word,
    Cue,
}

pub fn family_of(sample: &Sample) -> Option<Family> {
    match sample.target_char() {
        WORD_TARGET => Some(Family::Word),
        CUE_TARGET => Some(Family::Cue),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub per_family: usize,
    pub partners_per_class: usize,
    pub fillers: usize,
    /// Half-width of the uniform noise added to word-vector centroids.
    pub noise: f64,
    /// Share of cue sentences read as de2.
    pub de_share: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { per_family: 1000, partners_per_class: 400, fillers: 40, noise: 0.5, de_share: 0.6, min_len: 6, max_len: 14, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub lexicon: Lexicon,
    pub samples: Vec<Sample>,
    pub vectors: WordVecStore,
}

impl SyntheticCorpus {
    pub fn segmenter(&self) -> MaxMatchSegmenter {
        MaxMatchSegmenter::from_store(&self.vectors)
    }

    /// Encodes `samples` against `vocab`, with word lookups through the store.
    pub fn encode(&self, vocab: &CharVocab, samples: &[Sample]) -> Vec<EncodedSample> {
        let seg = self.segmenter();
        Featurizer { vocab, words: Some((&self.vectors, &seg)) }.encode_all(samples)
    }
}

pub fn lexicon() -> Lexicon {
    Lexicon::from_entries([(WORD_TARGET, vec!["jiang1", "jiang4"]), (CUE_TARGET, vec!["de2", "dei3"])]).expect("static lexicon")
}

fn nth_char(base: u32, i: usize) -> char {
    char::from_u32(base + i as u32).expect("CJK block")
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    assert!(cfg.min_len >= 6 && cfg.max_len >= cfg.min_len, "sentences need room for a cue 3 to 5 positions back");
    let lexicon = lexicon();
    let class = |p: &str| lexicon.class_of(p).expect("in inventory");
    let mut rng = Rng::new(cfg.seed);
    let fillers: Vec<char> = (0..cfg.fillers).map(|i| nth_char(FILLER_BASE, i)).collect();
    let partners: [Vec<char>; 2] =
        [0, 1].map(|k| (0..cfg.partners_per_class).map(|i| nth_char(PARTNER_BASE, k * cfg.partners_per_class + i)).collect());

    let mut vectors = WordVecStore::new();
    for pool in &partners {
        let centroid: Vec<f64> = (0..WORD_DIM).map(|_| rng.uniform(-1.0, 1.0)).collect();
        for &p in pool {
            for word in [format!("{WORD_TARGET}{p}"), format!("{p}{WORD_TARGET}")] {
                let v: Vec<f64> = centroid.iter().map(|c| c + rng.uniform(-cfg.noise, cfg.noise)).collect();
                vectors.insert(&word, &v).expect("fixed width");
            }
        }
    }
    vectors.insert(&CUE_TARGET.to_string(), &[0.1; WORD_DIM]).expect("fixed width");

    let filler_run = |rng: &mut Rng, n: usize| -> Vec<char> { (0..n).map(|_| fillers[rng.below(fillers.len())]).collect() };
    let mut samples = Vec::with_capacity(2 * cfg.per_family);
    for i in 0..2 * cfg.per_family {
        let len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
        let mut chars = filler_run(&mut rng, len);
        let (target, gold) = if i % 2 == 0 {
            let k = rng.below(2);
            let partner = partners[k][rng.below(partners[k].len())];
            let start = rng.below(len - 1);
            let target = if rng.below(2) == 0 {
                chars[start] = WORD_TARGET;
                chars[start + 1] = partner;
                start
            } else {
                chars[start] = partner;
                chars[start + 1] = WORD_TARGET;
                start + 1
            };
            (target, class(if k == 0 { "jiang1" } else { "jiang4" }))
        } else {
            let gap = 3 + rng.below(3);
            let target = gap + rng.below(len - gap);
            let de = rng.unit() < cfg.de_share;
            let cues = if de { &DE_CUES } else { &DEI_CUES };
            chars[target] = CUE_TARGET;
            chars[target - gap] = cues[rng.below(cues.len())];
            (target, class(if de { "de2" } else { "dei3" }))
        };
        samples.push(Sample { chars, target, word_span: None, gold });
    }
    SyntheticCorpus { lexicon, samples, vectors }
}
