use polyphone_core::corpus::{Batch, EncodedSample};
use polyphone_core::eval::predict_pinyin;
use polyphone_core::features::{PAD_ID, WORD_DIM};
use polyphone_core::model::forward;
use polyphone_core::numcore::{Parameters, softmax};
use polyphone_core::{CharVocab, Lexicon, Model, ModelDims, ModelParams, Rng, Variant, WordVecStore};
use proptest::prelude::*;

fn dims(classes: usize) -> ModelDims {
    ModelDims { char_dim: 6, word_dim: WORD_DIM, hidden: 5, fc1: 8, fc2: 7, classes }
}

fn store() -> WordVecStore {
    let mut rng = Rng::new(99);
    let mut s = WordVecStore::new();
    for w in ["背包", "背", "包"] {
        let v: Vec<f64> = (0..WORD_DIM).map(|_| rng.uniform(-1.0, 1.0)).collect();
        s.insert(w, &v).unwrap();
    }
    s
}

fn sample(ids: Vec<u32>, target: usize, word: Option<usize>) -> EncodedSample {
    EncodedSample { char_ids: ids, target, word, gold: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn padding_does_not_change_logits(
        a in prop::collection::vec(1u32..20, 1..10),
        extra in prop::collection::vec(1u32..20, 1..10),
        ta in any::<prop::sample::Index>(),
        seed in any::<u64>(),
        v in 0usize..3,
    ) {
        let words = store();
        let params = ModelParams::init(Variant::ALL[v], dims(4), 20, &mut Rng::new(seed)).unwrap();
        let short = sample(a.clone(), ta.index(a.len()), Some(0));
        let long = sample([a.clone(), extra].concat(), 0, None);
        let joint = Batch::from_samples([&long, &short], PAD_ID).unwrap();
        let alone = Batch::from_samples([&short], PAD_ID).unwrap();
        let (lj, _) = forward(&joint, &params, Some(&words), false, &mut Rng::new(0)).unwrap();
        let (la, _) = forward(&alone, &params, Some(&words), false, &mut Rng::new(0)).unwrap();
        for (x, y) in lj.row(1)[..4].iter().zip(la.data()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn inference_is_deterministic_and_rows_independent() {
    let words = store();
    for variant in Variant::ALL {
        let params = ModelParams::init(variant, dims(3), 10, &mut Rng::new(1)).unwrap();
        let s = sample(vec![2, 3, 4, 5], 2, Some(1));
        let batch = Batch::from_samples([&s, &s], PAD_ID).unwrap();
        let (a, _) = forward(&batch, &params, Some(&words), false, &mut Rng::new(5)).unwrap();
        let (b, _) = forward(&batch, &params, Some(&words), false, &mut Rng::new(6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(0)[..3], a.row(1)[..3]);
    }
}

#[test]
fn zero_predictor_is_uniform() {
    let mut params = ModelParams::init(Variant::Cc, dims(5), 10, &mut Rng::new(2)).unwrap();
    for d in [&mut params.fc1, &mut params.fc2, &mut params.fc3] {
        d.w.fill(0.0);
        d.b.fill(0.0);
    }
    let batch = Batch::from_samples([&sample(vec![2, 3], 1, None)], PAD_ID).unwrap();
    let (logits, _) = forward(&batch, &params, None, false, &mut Rng::new(0)).unwrap();
    assert!(logits.data().iter().all(|&v| v == 0.0));
    let p = softmax(&logits).unwrap();
    assert!(p.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
}

fn model(variant: Variant, seed: u64) -> Model {
    let lexicon = Lexicon::from_entries([('背', vec!["bei1", "bei4"]), ('长', vec!["chang2", "zhang3"]), ('得', vec!["de2", "dei3", "de5"])]).unwrap();
    let vocab = CharVocab::from_chars("我背包长得".chars());
    let params = ModelParams::init(variant, dims(lexicon.num_classes()), vocab.len(), &mut Rng::new(seed)).unwrap();
    Model::new(params, vocab, lexicon).unwrap()
}

#[test]
fn restricted_prediction_stays_in_candidates() {
    let words = store();
    let seg = polyphone_core::MaxMatchSegmenter::from_store(&words);
    for seed in 0..30 {
        let m = model(Variant::ALL[seed as usize % 3], seed);
        let r = predict_pinyin(&m, Some((&words, &seg)), "我背包", 1, true).unwrap();
        assert!(["bei1", "bei4"].contains(&r.chosen.as_str()), "{}", r.chosen);
        assert!((r.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let free = predict_pinyin(&m, Some((&words, &seg)), "我背包", 1, false).unwrap();
        if ["bei1", "bei4"].contains(&free.chosen.as_str()) {
            assert_eq!(free.chosen, r.chosen);
        }
    }
}

#[test]
fn uniform_model_picks_class_zero() {
    let mut m = model(Variant::Cc, 3);
    m.params.fc3.w.fill(0.0);
    m.params.fc3.b.fill(0.0);
    let r = predict_pinyin(&m, None, "长得", 1, false).unwrap();
    assert_eq!(r.chosen_class, 0);
    assert!(predict_pinyin(&m, None, "长得", 2, false).is_err());
    assert!(predict_pinyin(&m, None, "我长", 0, false).is_err());
}

#[test]
fn parameters_visit_in_a_stable_order() {
    let m = model(Variant::Cwc, 1);
    let mut names = Vec::new();
    m.params.visit(&mut |n, _| names.push(n.to_string()));
    assert_eq!(names.first().map(String::as_str), Some("char_embedding"));
    assert_eq!(names.len(), 13);
}
