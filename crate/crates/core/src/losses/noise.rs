use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::Sentence;

/// Default chance of swapping each bigram.
pub const SWAP_PROB: f64 = 0.5;

/// Splits `tokens` left to right into disjoint pairs and swaps each pair
/// with probability `p`. A trailing odd token stays in place.
pub fn bigram_swap<T: Clone, R: Rng + ?Sized>(tokens: &[T], rng: &mut R, p: f64) -> Vec<T> {
    let mut out = tokens.to_vec();
    for pair in out.chunks_exact_mut(2) {
        if rng.gen_bool(p) {
            pair.swap(0, 1);
        }
    }
    out
}

/// Bigram-swap noise with the default probability, seeded.
pub fn noise(sentence: &Sentence, seed: u64) -> Sentence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = bigram_swap(sentence.tokens(), &mut rng, SWAP_PROB);
    Sentence::from_tokens(tokens).expect("tokens come from a valid sentence")
}
