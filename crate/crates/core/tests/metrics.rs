//! Metric implementations against independent computations.

use simplify_core::gradcheck::Sampler;
use simplify_core::eval::{bleu, bleu_stats, sentence_sari, BleuOptions, EvalInstance};
use simplify_core::text::{sentence_ease, tokenize, Sentence};

fn s(text: &str) -> Sentence {
    tokenize(text).unwrap()
}

mod sari_oracle;

fn random_sentence(rng: &mut Sampler, words: &[&str], max_len: usize) -> Sentence {
    let n = 1 + rng.below(max_len);
    Sentence::from_tokens((0..n).map(|_| words[rng.below(words.len())])).unwrap()
}

#[test]
fn sari_matches_brute_force_on_random_instances() {
    let words = ["a", "b", "c", "d", "e", "f"];
    let mut rng = Sampler::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let src = random_sentence(&mut rng, &words, 12);
        let pred = random_sentence(&mut rng, &words, 12);
        let refs: Vec<Sentence> = (0..1 + rng.below(4)).map(|_| random_sentence(&mut rng, &words, 12)).collect();
        let fast = sentence_sari(&src, &pred, &refs, 4);
        let raw: Vec<Vec<String>> = refs.iter().map(|r| r.tokens().to_vec()).collect();
        let slow = sari_oracle::sari(src.tokens(), pred.tokens(), &raw, 4);
        worst = worst.max((fast - slow).abs());
        assert!((0.0..=100.0).contains(&fast));
    }
    assert!(worst < 1e-9, "worst deviation {worst:e}");
}

#[test]
fn sari_lexical_substitution_corpus() {
    let items = [
        ("the feline sat on the mat", "the cat sat on the mat", vec!["the cat sat on the mat", "a cat sat on the mat"]),
        ("he consumed the meal", "he ate the meal", vec!["he ate the meal", "he ate the food"]),
        ("she departed early", "she departed early", vec!["she left early"]),
    ];
    for (src, pred, refs) in items {
        let refs: Vec<Sentence> = refs.into_iter().map(s).collect();
        let raw: Vec<Vec<String>> = refs.iter().map(|r| r.tokens().to_vec()).collect();
        let fast = sentence_sari(&s(src), &s(pred), &refs, 4);
        let slow = sari_oracle::sari(s(src).tokens(), s(pred).tokens(), &raw, 4);
        assert!((fast - slow).abs() < 1e-9);
        // the reference itself never scores below copying the source
        let up = sentence_sari(&s(src), &refs[0], &refs, 4);
        let copy = sentence_sari(&s(src), &s(src), &refs, 4);
        assert!(up >= copy);
    }
}

#[test]
fn bleu_exact_reference_is_100() {
    let items = vec![
        EvalInstance::new(s("x y"), s("the cat sat on the mat"), vec![s("a b"), s("the cat sat on the mat")]).unwrap(),
        EvalInstance::new(s("x y"), s("one two three four five"), vec![s("one two three four five")]).unwrap(),
    ];
    assert!((bleu(&items, BleuOptions::default()).unwrap() - 100.0).abs() < 1e-9);
}

#[test]
fn bleu_no_overlap_is_zero() {
    let items = vec![EvalInstance::new(s("x"), s("p q r s t"), vec![s("a b c d e")]).unwrap()];
    assert_eq!(bleu(&items, BleuOptions::default()).unwrap(), 0.0);
}

#[test]
fn bleu_two_instance_hand_computation() {
    // 1: "the cat sat on the mat" vs refs "the cat is on the mat" and
    //    "there is a cat on the mat"
    //    unigrams 5/6 (sat unmatched), bigrams 3/5, trigrams 1/4, 4-grams 0/3
    // 2: "a dog ran" vs "the dog ran away"
    //    unigrams 2/3, bigrams 1/2, trigrams 0/1, 4-grams 0/0
    // closest reference lengths 6 and 4, prediction length 9
    let items = vec![
        EvalInstance::new(s("q"), s("the cat sat on the mat"), vec![s("the cat is on the mat"), s("there is a cat on the mat")]).unwrap(),
        EvalInstance::new(s("q"), s("a dog ran"), vec![s("the dog ran away")]).unwrap(),
    ];
    let st = bleu_stats(items.iter().map(|i| (&i.prediction, &i.references[..])), 4);
    assert_eq!(st.matches, vec![7, 4, 1, 0]);
    assert_eq!(st.totals, vec![9, 7, 5, 3]);
    assert_eq!((st.prediction_len, st.reference_len), (9, 10));
    assert_eq!(bleu(&items, BleuOptions::default()).unwrap(), 0.0);

    let bp = (1.0f64 - 10.0 / 9.0).exp();
    let three = bp * (7.0 / 9.0 * 4.0 / 7.0 * 1.0 / 5.0f64).powf(1.0 / 3.0) * 100.0;
    let got = bleu(&items, BleuOptions { max_n: 3, smooth: false }).unwrap();
    assert!((got - three).abs() < 1e-9, "{got} vs {three}");

    let smoothed = bp * (7.0 / 9.0 * 5.0 / 8.0 * 2.0 / 6.0 * 1.0 / 4.0f64).powf(0.25) * 100.0;
    let got = bleu(&items, BleuOptions { max_n: 4, smooth: true }).unwrap();
    assert!((got - smoothed).abs() < 1e-9);
}

#[test]
fn flesch_of_the_cat_sat() {
    assert!((sentence_ease(&s("The cat sat.")).unwrap() - 119.19).abs() < 0.01);
}
