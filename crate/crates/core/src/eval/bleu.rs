use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ngram::counts;
use crate::error::{Error, Result};
use crate::text::Sentence;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Add one to numerator and denominator of every order above 1, so tiny
    /// corpora without a matching 4-gram do not score 0.
    pub smooth: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self { max_n: 4, smooth: false }
    }
}

/// Corpus totals that BLEU is computed from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BleuStats {
    /// Clipped n-gram matches per order.
    pub matches: Vec<usize>,
    /// Prediction n-gram counts per order.
    pub totals: Vec<usize>,
    pub prediction_len: usize,
    /// Sum of the closest reference length per instance.
    pub reference_len: usize,
}

/// Length of the reference closest to `len`, the shorter one on ties.
pub fn closest_reference_len(len: usize, references: &[Sentence]) -> usize {
    references
        .iter()
        .map(Sentence::n)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

pub fn bleu_stats<'a>(
    pairs: impl IntoIterator<Item = (&'a Sentence, &'a [Sentence])>,
    max_n: usize,
) -> BleuStats {
    let mut stats = BleuStats {
        matches: vec![0; max_n],
        totals: vec![0; max_n],
        ..Default::default()
    };
    for (prediction, references) in pairs {
        stats.prediction_len += prediction.n();
        stats.reference_len += closest_reference_len(prediction.n(), references);
        for n in 1..=max_n {
            let pred = counts(prediction.tokens(), n);
            let mut best: HashMap<&[String], usize> = HashMap::new();
            for reference in references {
                for (g, v) in counts(reference.tokens(), n) {
                    let e = best.entry(g).or_insert(0);
                    *e = (*e).max(v);
                }
            }
            for (g, v) in &pred {
                stats.matches[n - 1] += (*v).min(best.get(g).copied().unwrap_or(0));
                stats.totals[n - 1] += v;
            }
        }
    }
    stats
}

impl BleuStats {
    /// BLEU in `[0, 100]`.
    pub fn score(&self, smooth: bool) -> f64 {
        let mut log_sum = 0.0;
        for (i, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            let (m, t) = if smooth && i > 0 { (m + 1, t + 1) } else { (m, t) };
            if m == 0 || t == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        let c = self.prediction_len as f64;
        let r = self.reference_len as f64;
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * bp * (log_sum / self.matches.len() as f64).exp()
    }
}

/// Corpus BLEU over `(prediction, references)` pairs.
pub fn corpus_bleu<'a>(
    pairs: impl IntoIterator<Item = (&'a Sentence, &'a [Sentence])>,
    options: BleuOptions,
) -> Result<f64> {
    let pairs: Vec<_> = pairs.into_iter().collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("BLEU needs at least one instance".into()));
    }
    if options.max_n == 0 {
        return Err(Error::Config("BLEU max_n must be positive".into()));
    }
    Ok(bleu_stats(pairs, options.max_n).score(options.smooth))
}
