use polyphone::formats::{corpus_to_jsonl, lexicon_to_tsv, parse_corpus, parse_lexicon, parse_word_vectors, write_word_vectors};
use polyphone_core::corpus::{Lexicon, Sample};
use polyphone_core::features::{WordVecStore, WORD_DIM};
use proptest::prelude::*;

fn lexicon() -> Lexicon {
    parse_lexicon("背\tbei1,bei4\n长\tchang2,zhang3\n得\tde2,dei3,de5\n").unwrap()
}

prop_compose! {
    fn sample()(text in "[背长得我们的好]{1,12}", pick in any::<prop::sample::Index>(), k in 0usize..3, span in any::<bool>()) -> Option<Sample> {
        let lex = lexicon();
        let chars: Vec<char> = text.chars().collect();
        let polys: Vec<usize> = (0..chars.len()).filter(|&i| lex.contains(chars[i])).collect();
        if polys.is_empty() {
            return None;
        }
        let target = polys[pick.index(polys.len())];
        let classes = lex.candidate_classes(chars[target]).unwrap();
        let word_span = span.then_some((target, (target + 2).min(chars.len())));
        Some(Sample { chars, target, word_span, gold: classes[k % classes.len()] })
    }
}

proptest! {
    #[test]
    fn corpus_round_trips(samples in prop::collection::vec(sample(), 0..20)) {
        let lex = lexicon();
        let samples: Vec<Sample> = samples.into_iter().flatten().collect();
        let text = corpus_to_jsonl(&samples, &lex);
        prop_assert_eq!(parse_corpus(&text, &lex).unwrap(), samples);
    }
}

#[test]
fn lexicon_round_trips() {
    let lex = lexicon();
    assert_eq!(parse_lexicon(&lexicon_to_tsv(&lex)).unwrap(), lex);
}

#[test]
fn word_vectors_round_trip_exactly() {
    let mut store = WordVecStore::new();
    for (i, w) in ["背包", "长大", "得"].into_iter().enumerate() {
        let v: Vec<f64> = (0..WORD_DIM).map(|j| (i * WORD_DIM + j) as f64 / 7.0 - 3.3e-5).collect();
        store.insert(w, &v).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    write_word_vectors(&path, &store).unwrap();
    let back = parse_word_vectors(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.tokens(), store.tokens());
    for t in store.tokens() {
        assert_eq!(back.get(t), store.get(t));
    }
}
