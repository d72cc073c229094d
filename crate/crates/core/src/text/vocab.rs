use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Sentence;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Bidirectional token/id table with fixed reserved ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from(Vec::new())
    }
}

impl From<Vec<String>> for Vocabulary {
    /// Reserved tokens are always placed first; duplicates are dropped.
    fn from(tokens: Vec<String>) -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED.iter().map(|t| t.to_string()).chain(tokens) {
            vocab.insert(&t);
        }
        vocab
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds a vocabulary from every token of `sentences`, most frequent
    /// first (ties broken alphabetically), truncated to `max_size` entries
    /// including the reserved ones.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a Sentence>, max_size: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for t in s.tokens() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let room = max_size.saturating_sub(RESERVED.len());
        Self::from(ranked.into_iter().take(room).map(|(t, _)| t.to_string()).collect::<Vec<_>>())
    }

    fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens().iter().map(|t| self.id(t)).collect()
    }

    /// Tokens for `ids`, stopping at the first [`EOS`].
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .map(|&id| self.token(id).to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocabulary::default();
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<s>"), BOS);
        assert_eq!(v.id("</s>"), EOS);
        assert_eq!(v.id("<unk>"), UNK);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let v = Vocabulary::build([&tokenize("the cat").unwrap()], 100);
        assert_eq!(v.id("dog"), UNK);
        assert_ne!(v.id("cat"), UNK);
    }

    #[test]
    fn build_orders_by_frequency_and_truncates() {
        let s = tokenize("b a b c b a").unwrap();
        let v = Vocabulary::build([&s], 6);
        assert_eq!(&v.tokens()[4..], ["b", "a"]);
    }

    #[test]
    fn ids_are_dense_and_round_trip() {
        let s = tokenize("one two three two").unwrap();
        let v = Vocabulary::build([&s], 50);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), i);
        }
        assert_eq!(v.decode(&v.encode(&s)), s.tokens());
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::build([&tokenize("x y z").unwrap()], 50);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }
}
