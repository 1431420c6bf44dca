//! Accuracy reports, the majority-pinyin baseline and single-sentence prediction.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{make_batches, EncodedSample, Lexicon, Sample};
use crate::error::{bail, Result};
use crate::features::{Featurizer, Segmenter, WordVecStore, PAD_ID};
use crate::model::{forward, Model, ModelParams};
use crate::numcore::loss::argmax_rows;
use crate::numcore::{argmax, softmax, Rng};

/// Unrestricted argmax class for every sample, in input order.
pub fn predict_classes(params: &ModelParams, samples: &[EncodedSample], words: Option<&WordVecStore>, batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    // inference draws nothing from the rng
    let mut rng = Rng::new(0);
    for batch in make_batches(samples, batch_size, PAD_ID, 0, false)? {
        let (logits, _) = forward(&batch, params, words, false, &mut rng)?;
        out.extend(argmax_rows(&logits));
    }
    Ok(out)
}

/// Per-character gold-class counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    counts: BTreeMap<char, BTreeMap<usize, usize>>,
}

impl ClassCounts {
    pub fn from_samples(samples: &[Sample]) -> Self {
        let mut counts: BTreeMap<char, BTreeMap<usize, usize>> = BTreeMap::new();
        for s in samples {
            *counts.entry(s.target_char()).or_default().entry(s.gold).or_default() += 1;
        }
        Self { counts }
    }

    /// Most frequent class of `ch`; ties go to the lowest class index.
    pub fn majority(&self, ch: char) -> Option<usize> {
        let classes = self.counts.get(&ch)?;
        let mut best: Option<(usize, usize)> = None;
        for (&class, &n) in classes {
            if best.map_or(true, |(_, m)| n > m) {
                best = Some((class, n));
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn classes(&self, ch: char) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.get(&ch).into_iter().flat_map(|m| m.iter().map(|(c, n)| (*c, *n)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacterRow {
    pub character: char,
    pub high_freq_pinyin: String,
    /// Every other observed pinyin, most frequent first.
    pub low_freq_pinyins: Vec<String>,
    /// Share of this character's eval samples whose gold is the high-frequency pinyin.
    pub high_freq_rate: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub overall: f64,
    pub correct: usize,
    pub total: usize,
    /// Majority-pinyin accuracy over all eval samples.
    pub high_freq_rate: f64,
    pub rows: Vec<CharacterRow>,
}

/// Assembles a report from predictions. The high-frequency pinyin of each
/// character comes from `reference` (normally the training split), falling
/// back to the eval samples themselves.
pub fn report(predicted: &[usize], eval: &[Sample], lexicon: &Lexicon, reference: Option<&ClassCounts>) -> Result<EvalReport> {
    if predicted.len() != eval.len() {
        bail!(Shape, "{} predictions for {} samples", predicted.len(), eval.len());
    }
    let eval_counts = ClassCounts::from_samples(eval);
    let mut per_char: BTreeMap<char, (usize, usize, usize)> = BTreeMap::new();
    let majority_of = |ch: char| reference.and_then(|r| r.majority(ch)).or_else(|| eval_counts.majority(ch)).unwrap_or(0);
    for (s, &p) in eval.iter().zip(predicted) {
        let e = per_char.entry(s.target_char()).or_default();
        e.0 += usize::from(p == s.gold);
        e.1 += 1;
        e.2 += usize::from(s.gold == majority_of(s.target_char()));
    }
    let mut rows = Vec::with_capacity(per_char.len());
    for (&ch, &(correct, count, majority_hits)) in &per_char {
        let majority = majority_of(ch);
        let mut others: BTreeMap<usize, usize> = BTreeMap::new();
        for counts in reference.into_iter().chain(core::iter::once(&eval_counts)) {
            for (class, n) in counts.classes(ch) {
                if class != majority {
                    *others.entry(class).or_default() += n;
                }
            }
        }
        let mut others: Vec<(usize, usize)> = others.into_iter().collect();
        others.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.push(CharacterRow {
            character: ch,
            high_freq_pinyin: lexicon.pinyin(majority).into(),
            low_freq_pinyins: others.into_iter().map(|(c, _)| lexicon.pinyin(c).into()).collect(),
            high_freq_rate: majority_hits as f64 / count as f64,
            accuracy: correct as f64 / count as f64,
            correct,
            count,
        });
    }
    let correct: usize = rows.iter().map(|r| r.correct).sum();
    let majority_hits: usize = per_char.values().map(|e| e.2).sum();
    let total = eval.len();
    let ratio = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(EvalReport { overall: ratio(correct), correct, total, high_freq_rate: ratio(majority_hits), rows })
}

/// Runs the model over `eval` and reports accuracy.
pub fn accuracy(
    model: &Model,
    eval: &[Sample],
    words: Option<(&WordVecStore, &dyn Segmenter)>,
    reference: Option<&ClassCounts>,
    batch_size: usize,
) -> Result<EvalReport> {
    let featurizer = Featurizer { vocab: &model.vocab, words };
    let encoded = featurizer.encode_all(eval);
    let predicted = predict_classes(&model.params, &encoded, words.map(|w| w.0), batch_size)?;
    report(&predicted, eval, &model.lexicon, reference)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRow {
    pub character: char,
    pub predicted: String,
    /// `false` when the character never occurs in training and the first
    /// lexicon candidate was used instead.
    pub seen_in_train: bool,
    pub rate: f64,
    pub correct: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub overall: f64,
    pub correct: usize,
    pub total: usize,
    pub rows: Vec<BaselineRow>,
}

/// Predicts each character's most frequent training pinyin for all its eval samples.
pub fn majority_baseline(train: &[Sample], eval: &[Sample], lexicon: &Lexicon) -> Result<BaselineReport> {
    if train.is_empty() || eval.is_empty() {
        bail!(Config, "baseline needs non-empty train and eval sets");
    }
    let counts = ClassCounts::from_samples(train);
    let mut per_char: BTreeMap<char, (usize, usize)> = BTreeMap::new();
    let mut rows = Vec::new();
    for s in eval {
        let e = per_char.entry(s.target_char()).or_default();
        e.1 += 1;
        let guess = counts.majority(s.target_char()).or_else(|| lexicon.candidate_classes(s.target_char()).map(|c| c[0]));
        e.0 += usize::from(guess == Some(s.gold));
    }
    for (&ch, &(correct, count)) in &per_char {
        let seen = counts.majority(ch);
        let guess = match seen.or_else(|| lexicon.candidate_classes(ch).map(|c| c[0])) {
            Some(c) => c,
            None => bail!(Domain, "character {ch} is not in the lexicon"),
        };
        rows.push(BaselineRow {
            character: ch,
            predicted: lexicon.pinyin(guess).into(),
            seen_in_train: seen.is_some(),
            rate: correct as f64 / count as f64,
            correct,
            count,
        });
    }
    let correct = rows.iter().map(|r| r.correct).sum();
    Ok(BaselineReport { overall: correct as f64 / eval.len() as f64, correct, total: eval.len(), rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub character: char,
    /// Softmax over the full inventory.
    pub probabilities: Vec<f64>,
    /// The character's lexicon candidates with probabilities, most likely first.
    pub candidates: Vec<(String, f64)>,
    pub chosen: String,
    pub chosen_class: usize,
    pub restricted: bool,
}

/// Predicts the pinyin of `chars[index]`. With `restrict`, the argmax is
/// taken over the character's lexicon candidates only.
pub fn predict_pinyin(
    model: &Model,
    words: Option<(&WordVecStore, &dyn Segmenter)>,
    sentence: &str,
    index: usize,
    restrict: bool,
) -> Result<PredictionResult> {
    let chars: Vec<char> = sentence.chars().collect();
    let Some(&ch) = chars.get(index) else {
        bail!(Index, "index {index} outside sentence of {} characters", chars.len());
    };
    let Some(candidates) = model.lexicon.candidate_classes(ch) else {
        bail!(Domain, "character {ch} is not in the lexicon");
    };
    let sample = Sample { chars, target: index, word_span: None, gold: 0 };
    let encoded = Featurizer { vocab: &model.vocab, words }.encode(&sample);
    let batch = crate::corpus::Batch::from_samples(core::iter::once(&encoded), PAD_ID)?;
    let (logits, _) = forward(&batch, &model.params, words.map(|w| w.0), false, &mut Rng::new(0))?;
    let probs = softmax(&logits)?.into_data();
    let chosen_class = if restrict {
        let mut best = candidates[0];
        for &c in candidates {
            if probs[c] > probs[best] || (probs[c] == probs[best] && c < best) {
                best = c;
            }
        }
        best
    } else {
        argmax(&probs)
    };
    let mut ranked: Vec<(usize, f64)> = candidates.iter().map(|&c| (c, probs[c])).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(PredictionResult {
        character: ch,
        candidates: ranked.into_iter().map(|(c, p)| (model.lexicon.pinyin(c).into(), p)).collect(),
        chosen: model.lexicon.pinyin(chosen_class).into(),
        chosen_class,
        probabilities: probs,
        restricted: restrict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lexicon() -> Lexicon {
        Lexicon::from_entries([('传', vec!["chuan2", "zhuan4"]), ('为', vec!["wei2", "wei4"])]).unwrap()
    }

    fn sample(ch: char, pinyin: &str, lex: &Lexicon) -> Sample {
        Sample { chars: vec![ch], target: 0, word_span: None, gold: lex.class_of(pinyin).unwrap() }
    }

    #[test]
    fn perfect_predictions_and_weighted_identity() {
        let lex = lexicon();
        let eval: Vec<Sample> = [("传", "chuan2"), ("传", "zhuan4"), ("为", "wei2"), ("为", "wei4"), ("为", "wei4")]
            .iter()
            .map(|(c, p)| sample(c.chars().next().unwrap(), p, &lex))
            .collect();
        let gold: Vec<usize> = eval.iter().map(|s| s.gold).collect();
        assert_eq!(report(&gold, &eval, &lex, None).unwrap().overall, 1.0);

        let mut predicted = gold.clone();
        predicted[0] = lex.class_of("zhuan4").unwrap();
        predicted[4] = lex.class_of("wei2").unwrap();
        let r = report(&predicted, &eval, &lex, None).unwrap();
        let weighted: f64 = r.rows.iter().map(|row| row.accuracy * row.count as f64).sum::<f64>() / r.total as f64;
        assert_eq!(weighted, r.overall);
        assert_eq!(r.overall, 3.0 / 5.0);
        let wei = r.rows.iter().find(|row| row.character == '为').unwrap();
        assert_eq!(wei.high_freq_pinyin, "wei4");
        assert_eq!(wei.low_freq_pinyins, vec!["wei2"]);
    }

    #[test]
    fn baseline_uses_training_majority() {
        let lex = lexicon();
        let train = vec![sample('传', "zhuan4", &lex), sample('传', "zhuan4", &lex), sample('传', "chuan2", &lex)];
        let eval = vec![sample('传', "zhuan4", &lex), sample('传', "chuan2", &lex), sample('为', "wei4", &lex)];
        let b = majority_baseline(&train, &eval, &lex).unwrap();
        let chuan = b.rows.iter().find(|r| r.character == '传').unwrap();
        assert_eq!(chuan.predicted, "zhuan4");
        assert_eq!(chuan.rate, 0.5);
        let wei = b.rows.iter().find(|r| r.character == '为').unwrap();
        assert!(!wei.seen_in_train);
        assert_eq!(wei.predicted, "wei2");
        assert_eq!(wei.rate, 0.0);
        assert_eq!(b.overall, 1.0 / 3.0);
        assert!(majority_baseline(&[], &eval, &lex).is_err());
    }

    #[test]
    fn single_pinyin_eval_gives_full_baseline() {
        let lex = lexicon();
        let train = vec![sample('为', "wei4", &lex)];
        let eval = vec![sample('为', "wei4", &lex); 4];
        assert_eq!(majority_baseline(&train, &eval, &lex).unwrap().overall, 1.0);
    }
}
