use std::collections::BTreeMap;

use polyphone_core::corpus::{make_batches, split_dataset, EncodedSample, Lexicon, Sample, SplitRule};
use polyphone_core::eval::report;
use polyphone_core::features::{MaxMatchSegmenter, Segmenter, PAD_ID};
use polyphone_core::numcore::{softmax, Parameters};
use polyphone_core::train::{lr_at, sgd_step, DecayUnit, TrainConfig};
use polyphone_core::{ModelDims, ModelParams, Rng, Tensor, Variant};
use proptest::prelude::*;

fn lexicon() -> Lexicon {
    Lexicon::from_entries([('将', vec!["jiang1", "jiang4"]), ('得', vec!["de2", "dei3", "de5"]), ('长', vec!["chang2", "zhang3"])]).unwrap()
}

prop_compose! {
    fn samples()(spec in prop::collection::vec((0usize..3, 0usize..3, 1usize..6), 1..120)) -> Vec<Sample> {
        let lex = lexicon();
        spec.into_iter()
            .map(|(c, k, len)| {
                let ch = ['将', '得', '长'][c];
                let classes = lex.candidate_classes(ch).unwrap();
                let mut chars = vec!['我'; len];
                chars[len - 1] = ch;
                Sample { chars, target: len - 1, word_span: None, gold: classes[k % classes.len()] }
            })
            .collect()
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(
        rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 5), 1..6),
        shift in -100.0f64..100.0,
    ) {
        let b = rows.len();
        let logits = Tensor::from_vec(&[b, 5], rows.concat()).unwrap();
        let shifted = Tensor::from_vec(&[b, 5], logits.data().iter().map(|v| v + shift).collect()).unwrap();
        let (p, q) = (softmax(&logits).unwrap(), softmax(&shifted).unwrap());
        for r in 0..b {
            let sum: f64 = p.row(r)[..5].iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
        prop_assert!(p.max_abs_diff(&q) < 1e-12);
    }

    #[test]
    fn split_partitions_and_follows_the_rule(samples in samples(), seed in any::<u64>()) {
        let rule = SplitRule::default();
        let (train, eval) = split_dataset(&samples, &rule, seed).unwrap();
        prop_assert_eq!(train.len() + eval.len(), samples.len());
        let mut pairs: BTreeMap<(char, usize), (usize, usize)> = BTreeMap::new();
        for s in &samples {
            pairs.entry(s.pair()).or_default().0 += 1;
        }
        for s in &eval {
            pairs.get_mut(&s.pair()).unwrap().1 += 1;
        }
        for (n, taken) in pairs.values() {
            prop_assert_eq!(*taken, rule.eval_count(*n));
        }
    }

    #[test]
    fn batches_depad_to_their_samples(
        lens in prop::collection::vec(1usize..12, 1..40),
        batch_size in 1usize..9,
        seed in any::<u64>(),
        shuffle in any::<bool>(),
    ) {
        let samples: Vec<EncodedSample> = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| EncodedSample { char_ids: (0..n as u32).map(|j| 2 + j + i as u32).collect(), target: n - 1, word: None, gold: i })
            .collect();
        let batches = make_batches(&samples, batch_size, PAD_ID, seed, shuffle).unwrap();
        let mut seen = vec![false; samples.len()];
        for batch in &batches {
            prop_assert!(batch.len() <= batch_size);
            for b in 0..batch.len() {
                let s = &samples[batch.gold[b]];
                let row = batch.row(b);
                prop_assert_eq!(&row[..batch.lengths[b]], s.char_ids.as_slice());
                prop_assert!(row[batch.lengths[b]..].iter().all(|&c| c == PAD_ID));
                prop_assert_eq!(batch.targets[b], s.target);
                prop_assert!(!seen[batch.gold[b]]);
                seen[batch.gold[b]] = true;
            }
        }
        prop_assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn segmentation_tiles_the_sentence(
        words in prop::collection::vec("[一二三四五]{1,3}", 0..10),
        sentence in "[一二三四五六]{0,20}",
    ) {
        let seg = MaxMatchSegmenter::new(&words);
        let chars: Vec<char> = sentence.chars().collect();
        let spans = seg.segment(&chars);
        let mut at = 0;
        for &(s, e) in &spans {
            prop_assert_eq!(s, at);
            prop_assert!(e > s);
            at = e;
        }
        prop_assert_eq!(at, chars.len());
    }

    #[test]
    fn lr_is_non_increasing_and_floored(t in 0usize..100_000, dt in 0usize..5000, gamma in 0.01f64..0.99) {
        let cfg = TrainConfig { decay_factor: gamma, decay_unit: DecayUnit::Steps, ..TrainConfig::default() };
        let (a, b) = (lr_at(t, &cfg), lr_at(t + dt, &cfg));
        prop_assert!(b <= a);
        prop_assert!(b >= 1e-4);
        prop_assert!(a <= 0.1);
    }

    #[test]
    fn sgd_step_is_linear_in_lr(lr in 0.0f64..1.0, seed in any::<u64>()) {
        let dims = ModelDims { char_dim: 3, word_dim: 200, hidden: 2, fc1: 3, fc2: 3, classes: 2 };
        let mut rng = Rng::new(seed);
        let start = ModelParams::init(Variant::Cc, dims, 4, &mut rng).unwrap();
        let mut g = start.zeros_like();
        g.visit_mut(&mut |_, t| t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0)));
        let mut once = start.clone();
        sgd_step(&mut once, &mut g.clone(), lr).unwrap();
        let mut twice = start.clone();
        sgd_step(&mut twice, &mut g.clone(), lr / 2.0).unwrap();
        sgd_step(&mut twice, &mut g.clone(), lr / 2.0).unwrap();
        let mut worst: f64 = 0.0;
        let mut a = Vec::new();
        once.visit(&mut |_, t| a.push(t.clone()));
        let mut i = 0;
        twice.visit(&mut |_, t| {
            worst = worst.max(t.max_abs_diff(&a[i]));
            i += 1;
        });
        prop_assert!(worst < 1e-12);
        let mut finite = true;
        once.visit(&mut |_, t| finite &= t.is_finite());
        prop_assert!(finite);
    }

    #[test]
    fn per_character_accuracy_recombines_exactly(samples in samples(), seed in any::<u64>()) {
        let lex = lexicon();
        let mut rng = Rng::new(seed);
        let predicted: Vec<usize> = samples.iter().map(|s| if rng.below(3) == 0 { rng.below(lex.num_classes()) } else { s.gold }).collect();
        let r = report(&predicted, &samples, &lex, None).unwrap();
        let recombined: usize = r.rows.iter().map(|row| row.correct).sum();
        prop_assert_eq!(recombined, r.correct);
        prop_assert_eq!(r.rows.iter().map(|row| row.count).sum::<usize>(), samples.len());
        prop_assert_eq!(r.overall, r.correct as f64 / samples.len() as f64);
        for row in &r.rows {
            prop_assert_eq!(row.accuracy, row.correct as f64 / row.count as f64);
        }
    }
}
