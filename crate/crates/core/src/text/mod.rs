//! Tokenization, vocabulary, readability, corpus partitioning, corpus files
//! and the synthetic corpus generator.

mod corpus;
mod partition;
mod readability;
mod synth;
mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{
    load_embeddings, load_parallel, load_sentences, load_synonyms, read_lines, write_embeddings, write_lines,
    write_parallel, write_sentences, write_synonyms, Corpus, Embeddings, ParallelPair,
};
pub use partition::{partition_corpus, Bucket, BucketStats, Partition, PartitionBounds};
pub use readability::{count_syllables, flesch_ease, is_word, sentence_ease};
pub use synth::{generate_synthetic_corpus, EvalItem, SynthConfig, SyntheticCorpus};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

/// A tokenized sentence: lowercase, non-empty tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    /// Wraps already-tokenized text. Empty token strings are rejected.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Contract("sentence contains an empty token".into()));
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn n(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joined tokens.
    pub fn detokenize(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detokenize())
    }
}

/// Lowercases `text` and splits it into tokens: maximal runs of
/// alphanumeric characters, and every other non-space character on its own.
///
/// ```
/// use simplify_core::text::tokenize;
/// let s = tokenize("Don't stop").unwrap();
/// assert_eq!(s.tokens(), ["don", "'", "t", "stop"]);
/// ```
pub fn tokenize(text: &str) -> Result<Sentence> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput("text has no tokens".into()));
    }
    Ok(Sentence { tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("The cat sat.").unwrap().tokens(), ["the", "cat", "sat", "."]);
        assert_eq!(tokenize("Don't stop").unwrap().tokens(), ["don", "'", "t", "stop"]);
    }

    #[test]
    fn empty_and_blank_inputs_are_rejected() {
        assert!(matches!(tokenize(""), Err(Error::EmptyInput(_))));
        assert!(matches!(tokenize(" \t\n "), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn from_tokens_rejects_empty_strings() {
        assert!(Sentence::from_tokens(["a", ""]).is_err());
        assert_eq!(Sentence::from_tokens(["a", "b"]).unwrap().n(), 2);
    }

    proptest! {
        #[test]
        fn retokenizing_is_idempotent(text in "[A-Za-z0-9 ,.;'!?-]{1,60}") {
            if let Ok(first) = tokenize(&text) {
                let second = tokenize(&first.detokenize()).unwrap();
                prop_assert_eq!(first, second);
            }
        }

        #[test]
        fn tokens_are_lowercase_and_non_empty(text in "\\PC{1,40}") {
            if let Ok(s) = tokenize(&text) {
                for t in s.tokens() {
                    prop_assert!(!t.is_empty());
                    prop_assert!(!t.chars().any(char::is_whitespace));
                    prop_assert_eq!(t.to_lowercase(), t.clone());
                }
            }
        }
    }
}
