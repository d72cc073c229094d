use serde::{Deserialize, Serialize};

use super::{readability::sentence_ease, Sentence};

/// FE thresholds: `fe <= complex_max` is complex, `fe > simple_min` is
/// simple, anything between is dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionBounds {
    pub complex_max: f64,
    pub simple_min: f64,
}

impl Default for PartitionBounds {
    fn default() -> Self {
        Self {
            complex_max: 10.0,
            simple_min: 70.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    Simple,
    Complex,
    Discarded,
}

impl PartitionBounds {
    pub fn bucket(&self, fe: f64) -> Bucket {
        if fe <= self.complex_max {
            Bucket::Complex
        } else if fe > self.simple_min {
            Bucket::Simple
        } else {
            Bucket::Discarded
        }
    }
}

/// Summary of one bucket: the columns of a corpus statistics table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BucketStats {
    pub count: usize,
    pub avg_words: f64,
    pub avg_fe: f64,
    pub min_fe: f64,
    pub max_fe: f64,
}

impl BucketStats {
    fn of(items: &[(Sentence, f64)]) -> Self {
        if items.is_empty() {
            return Self::default();
        }
        let n = items.len() as f64;
        let words: usize = items
            .iter()
            .map(|(s, _)| s.tokens().iter().filter(|t| super::is_word(t)).count())
            .sum();
        let fes = items.iter().map(|(_, fe)| *fe);
        Self {
            count: items.len(),
            avg_words: words as f64 / n,
            avg_fe: items.iter().map(|(_, fe)| fe).sum::<f64>() / n,
            min_fe: fes.clone().fold(f64::INFINITY, f64::min),
            max_fe: fes.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Result of splitting sentences by readability.
#[derive(Clone, Debug, Default)]
pub struct Partition {
    pub simple: Vec<(Sentence, f64)>,
    pub complex: Vec<(Sentence, f64)>,
    /// Sentences in the middle band.
    pub discarded: usize,
    /// Sentences with no alphabetic word, which have no FE score.
    pub unscored: usize,
}

impl Partition {
    pub fn simple_stats(&self) -> BucketStats {
        BucketStats::of(&self.simple)
    }

    pub fn complex_stats(&self) -> BucketStats {
        BucketStats::of(&self.complex)
    }

    pub fn kept(&self) -> usize {
        self.simple.len() + self.complex.len()
    }

    pub fn simple_sentences(&self) -> Vec<Sentence> {
        self.simple.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn complex_sentences(&self) -> Vec<Sentence> {
        self.complex.iter().map(|(s, _)| s.clone()).collect()
    }
}

/// Scores each sentence on its own and assigns it to a bucket.
pub fn partition_corpus(sentences: impl IntoIterator<Item = Sentence>, bounds: PartitionBounds) -> Partition {
    let mut out = Partition::default();
    for s in sentences {
        let Ok(fe) = sentence_ease(&s) else {
            out.unscored += 1;
            continue;
        };
        match bounds.bucket(fe) {
            Bucket::Simple => out.simple.push((s, fe)),
            Bucket::Complex => out.complex.push((s, fe)),
            Bucket::Discarded => out.discarded += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use proptest::prelude::*;

    #[test]
    fn table_averages_land_in_their_buckets() {
        let b = PartitionBounds::default();
        assert_eq!(b.bucket(76.67), Bucket::Simple);
        assert_eq!(b.bucket(7.26), Bucket::Complex);
        assert_eq!(b.bucket(40.0), Bucket::Discarded);
        assert_eq!(b.bucket(10.0), Bucket::Complex);
        assert_eq!(b.bucket(70.0), Bucket::Discarded);
    }

    #[test]
    fn partitions_real_sentences() {
        let sentences = [
            "The cat sat.",
            "Notwithstanding considerable administrative complications, the organization implemented comprehensive modifications.",
            "...",
        ]
        .map(|t| tokenize(t).unwrap());
        let p = partition_corpus(sentences, PartitionBounds::default());
        assert_eq!(p.simple.len(), 1);
        assert_eq!(p.complex.len(), 1);
        assert_eq!(p.unscored, 1);
        let stats = p.simple_stats();
        assert_eq!(stats.count, 1);
        assert_eq!(stats.avg_words, 3.0);
        assert!((stats.avg_fe - 119.19).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn partition_is_exhaustive_and_exclusive(
            sents in proptest::collection::vec(proptest::collection::vec("[a-z]{1,14}|[.,]", 1..20), 0..40)
        ) {
            let input: Vec<Sentence> = sents.into_iter().map(|t| Sentence::from_tokens(t).unwrap()).collect();
            let n = input.len();
            let p = partition_corpus(input, PartitionBounds::default());
            prop_assert_eq!(p.kept() + p.discarded + p.unscored, n);
            for (_, fe) in &p.simple { prop_assert!(*fe > 70.0); }
            for (_, fe) in &p.complex { prop_assert!(*fe <= 10.0); }
        }
    }
}
