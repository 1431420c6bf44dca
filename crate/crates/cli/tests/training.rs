use polyphone::synthetic::{self, SyntheticConfig};
use polyphone_core::corpus::{split_dataset, Sample, SplitRule};
use polyphone_core::train::{fit, lr_at, train_epoch, DecayUnit, TrainConfig, TrainState};
use polyphone_core::model::DropoutRates;
use polyphone_core::{CharVocab, Model, ModelDims, ModelParams, Rng, Variant};

fn small_dims(classes: usize) -> ModelDims {
    ModelDims { char_dim: 16, word_dim: 200, hidden: 16, fc1: 32, fc2: 32, classes }
}

#[test]
fn single_sample_is_memorized_by_cw() {
    let corpus = synthetic::generate(&SyntheticConfig { per_family: 1, ..SyntheticConfig::default() });
    let sample = &corpus.samples[..1];
    let vocab = CharVocab::build(sample);
    let encoded = corpus.encode(&vocab, sample);
    let params = ModelParams::init(Variant::Cw, ModelDims::standard(4), vocab.len(), &mut Rng::new(0)).unwrap();
    let cfg = TrainConfig { batch_size: 1, ..TrainConfig::default() };
    let mut state = TrainState::new(params);
    let mut loss = f64::INFINITY;
    for _ in 0..200 {
        loss = train_epoch(&mut state, &encoded, Some(&corpus.vectors), &cfg).unwrap();
    }
    assert!(loss < 0.01, "loss after 200 epochs: {loss}");
}

/// One full batch per epoch and no dropout, so each epoch's loss is the exact
/// objective before a plain gradient step.
#[test]
fn moving_average_loss_does_not_increase() {
    let corpus = synthetic::generate(&SyntheticConfig { per_family: 100, seed: 3, ..SyntheticConfig::default() });
    let vocab = CharVocab::build(&corpus.samples);
    let encoded = corpus.encode(&vocab, &corpus.samples);
    let mut params = ModelParams::init(Variant::Cwc, small_dims(4), vocab.len(), &mut Rng::new(1)).unwrap();
    params.dropout = DropoutRates { encoder: 0.0, predictor: 0.0 };
    let cfg = TrainConfig { batch_size: encoded.len(), seed: 2, ..TrainConfig::default() };
    let mut state = TrainState::new(params);
    let losses: Vec<f64> = (0..50).map(|_| train_epoch(&mut state, &encoded, Some(&corpus.vectors), &cfg).unwrap()).collect();
    let averages: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    for (i, w) in averages.windows(2).enumerate() {
        assert!(w[1] <= w[0], "moving average rose at epoch {}: {averages:?}", i + 5);
    }
    assert!(averages[averages.len() - 1] < 0.9 * averages[0], "{averages:?}");
    let mut finite = true;
    polyphone_core::numcore::Parameters::visit(&state.params, &mut |_, t| finite &= t.is_finite());
    assert!(finite);
}

fn small_fit(max_epochs: usize, unit: DecayUnit) -> (Model, polyphone_core::train::FitOutcome, TrainConfig) {
    let corpus = synthetic::generate(&SyntheticConfig { per_family: 40, ..SyntheticConfig::default() });
    let (train, eval): (Vec<Sample>, Vec<Sample>) = split_dataset(&corpus.samples, &SplitRule::default(), 0).unwrap();
    let vocab = CharVocab::build(&train);
    let (t, e) = (corpus.encode(&vocab, &train), corpus.encode(&vocab, &eval));
    let params = ModelParams::init(Variant::Cc, small_dims(4), vocab.len(), &mut Rng::new(0)).unwrap();
    let model = Model::new(params, vocab, corpus.lexicon.clone()).unwrap();
    let cfg = TrainConfig { batch_size: 8, max_epochs, decay_interval: 2, decay_unit: unit, ..TrainConfig::default() };
    let outcome = fit(model.clone(), &t, &e, Some(&corpus.vectors), &cfg, |_| {}).unwrap();
    (model, outcome, cfg)
}

#[test]
fn zero_epochs_returns_the_initial_model() {
    let (model, outcome, _) = small_fit(0, DecayUnit::Epochs);
    assert_eq!(outcome.best, model);
    assert!(outcome.history.is_empty());
    assert_eq!(outcome.best_epoch, None);
}

#[test]
fn history_lr_follows_the_schedule() {
    let (_, outcome, cfg) = small_fit(5, DecayUnit::Epochs);
    assert_eq!(outcome.history.len(), 5);
    for row in &outcome.history {
        assert_eq!(row.lr, lr_at(row.epoch, &cfg));
    }
    let best = outcome.best_epoch.unwrap();
    let top = outcome.history.iter().map(|r| r.eval_acc).fold(0.0, f64::max);
    assert_eq!(outcome.history[best].eval_acc, top);
    assert!(outcome.history[..best].iter().all(|r| r.eval_acc < top));
}

#[test]
fn step_decay_lowers_the_rate_within_an_epoch() {
    let (_, outcome, _) = small_fit(2, DecayUnit::Steps);
    assert_eq!(outcome.history[0].lr, 0.1);
    assert!(outcome.history[1].lr < 0.1);
}

#[test]
fn patience_stops_after_stale_epochs() {
    let corpus = synthetic::generate(&SyntheticConfig { per_family: 40, ..SyntheticConfig::default() });
    let (train, eval) = split_dataset(&corpus.samples, &SplitRule::default(), 0).unwrap();
    let vocab = CharVocab::build(&train);
    let (t, e) = (corpus.encode(&vocab, &train), corpus.encode(&vocab, &eval));
    let params = ModelParams::init(Variant::Cw, small_dims(4), vocab.len(), &mut Rng::new(0)).unwrap();
    let model = Model::new(params, vocab, corpus.lexicon.clone()).unwrap();
    let cfg = TrainConfig { batch_size: 8, max_epochs: 40, patience: Some(2), ..TrainConfig::default() };
    let outcome = fit(model, &t, &e, Some(&corpus.vectors), &cfg, |_| {}).unwrap();
    let best = outcome.best_epoch.unwrap();
    assert_eq!(outcome.history.len(), best + 3, "stops two epochs after the last improvement");
}
