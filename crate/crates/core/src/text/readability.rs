use super::Sentence;
use crate::error::{Error, Result};

/// True for tokens made only of alphabetic characters. Only these count as
/// words for readability.
pub fn is_word(token: &str) -> bool {
    !token.is_empty() && token.chars().all(char::is_alphabetic)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate.
///
/// Counts maximal runs of `aeiouy`, drops a word-final lone `e` group when
/// it is not the only group, and never returns less than one. Tokens that
/// are not words have zero syllables.
pub fn count_syllables(token: &str) -> usize {
    if !is_word(token) {
        return 0;
    }
    let chars: Vec<char> = token.chars().flat_map(char::to_lowercase).collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    let silent_e = n >= 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch reading ease over a list of sentences:
/// `206.835 - 1.015 * words/sentences - 84.6 * syllables/words`.
pub fn flesch_ease(sentences: &[Sentence]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput("flesch ease needs at least one sentence".into()));
    }
    let mut words = 0usize;
    let mut syllables = 0usize;
    for s in sentences {
        for t in s.tokens().iter().filter(|t| is_word(t)) {
            words += 1;
            syllables += count_syllables(t);
        }
    }
    if words == 0 {
        return Err(Error::EmptyInput("no alphabetic words to score".into()));
    }
    let words = words as f64;
    Ok(206.835 - 1.015 * words / sentences.len() as f64 - 84.6 * syllables as f64 / words)
}

/// Flesch reading ease of one sentence.
pub fn sentence_ease(sentence: &Sentence) -> Result<f64> {
    flesch_ease(std::slice::from_ref(sentence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use proptest::prelude::*;

    #[test]
    fn syllable_examples() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("the"), 1);
        // sim-pli-fi-ca-tion: groups i, i, i, a, io
        assert_eq!(count_syllables("simplification"), 5);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("rhythm"), 1);
        assert_eq!(count_syllables("."), 0);
        assert_eq!(count_syllables("42"), 0);
    }

    #[test]
    fn the_cat_sat() {
        // 3 words, 1 sentence, 3 syllables: 206.835 - 3.045 - 84.6
        let fe = flesch_ease(&[tokenize("The cat sat.").unwrap()]).unwrap();
        assert!((fe - 119.19).abs() < 1e-9, "{fe}");
    }

    #[test]
    fn long_polysyllabic_sentence_scores_below_zero() {
        let s = Sentence::from_tokens(vec!["banana"; 40]).unwrap();
        assert_eq!(count_syllables("banana"), 3);
        // 206.835 - 40.6 - 253.8
        let fe = sentence_ease(&s).unwrap();
        assert!((fe - (206.835 - 40.6 - 253.8)).abs() < 1e-9);
        assert!(fe < 0.0);
    }

    #[test]
    fn punctuation_only_is_an_error() {
        assert!(flesch_ease(&[tokenize(". , !").unwrap()]).is_err());
        assert!(flesch_ease(&[]).is_err());
    }

    proptest! {
        #[test]
        fn duplication_leaves_score_unchanged(
            words in proptest::collection::vec("[a-z]{1,10}", 1..15),
            k in 1usize..6,
        ) {
            let s = Sentence::from_tokens(words).unwrap();
            let one = flesch_ease(std::slice::from_ref(&s)).unwrap();
            let many = flesch_ease(&vec![s; k]).unwrap();
            prop_assert!((one - many).abs() < 1e-9);
        }

        #[test]
        fn more_syllables_per_word_lowers_the_score(n in 1usize..20, extra in 1usize..5) {
            let short = Sentence::from_tokens(vec!["cat"; n]).unwrap();
            let long_word = "ba".repeat(1 + extra) + "t";
            let long = Sentence::from_tokens(vec![long_word; n]).unwrap();
            prop_assert!(sentence_ease(&long).unwrap() < sentence_ease(&short).unwrap());
        }

        #[test]
        fn words_have_at_least_one_syllable(w in "[a-z]{1,12}") {
            prop_assert!(count_syllables(&w) >= 1);
        }
    }
}
