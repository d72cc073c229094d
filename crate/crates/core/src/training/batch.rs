use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Batches per sorting window: sentences are length-sorted within a window
/// of this many batches so a batch holds similar lengths.
const WINDOW: usize = 16;

/// Position of a [`BatchStream`], enough to rebuild it exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPosition {
    pub epoch: u64,
    pub cursor: usize,
}

/// Endless deterministic batches of indices into one data set. Each epoch
/// is a seeded shuffle, bucketed by length, with batch order shuffled again.
#[derive(Clone, Debug)]
pub struct BatchStream {
    lengths: Vec<usize>,
    batch_size: usize,
    seed: u64,
    position: StreamPosition,
    batches: Vec<Vec<usize>>,
}

fn mix(seed: u64, epoch: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl BatchStream {
    pub fn new(lengths: Vec<usize>, batch_size: usize, seed: u64) -> Self {
        Self::at(lengths, batch_size, seed, StreamPosition::default())
    }

    pub fn at(lengths: Vec<usize>, batch_size: usize, seed: u64, position: StreamPosition) -> Self {
        let mut s = Self {
            lengths,
            batch_size: batch_size.max(1),
            seed,
            position,
            batches: Vec::new(),
        };
        s.batches = s.epoch_batches(position.epoch);
        s
    }

    pub fn position(&self) -> StreamPosition {
        self.position
    }

    fn epoch_batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        if self.lengths.is_empty() {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, epoch));
        let mut order: Vec<usize> = (0..self.lengths.len()).collect();
        order.shuffle(&mut rng);
        let mut batches = Vec::new();
        for window in order.chunks_mut(self.batch_size * WINDOW) {
            window.sort_by_key(|&i| self.lengths[i]);
            batches.extend(window.chunks(self.batch_size).map(<[usize]>::to_vec));
        }
        batches.shuffle(&mut rng);
        batches
    }

    /// The next batch; empty only when the data set is empty.
    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.batches.is_empty() {
            return Vec::new();
        }
        if self.position.cursor >= self.batches.len() {
            self.position.epoch += 1;
            self.position.cursor = 0;
            self.batches = self.epoch_batches(self.position.epoch);
        }
        let b = self.batches[self.position.cursor].clone();
        self.position.cursor += 1;
        b
    }
}

/// Per-step seed for noise draws.
pub fn step_seed(seed: u64, step: u64) -> u64 {
    mix(seed ^ 0x6E6F_6973_65, step)
}
