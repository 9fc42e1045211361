//! Deterministic random streams.
//!
//! Every stochastic routine takes an explicit [`RandomStream`]. A stream is a
//! ChaCha12 generator keyed by SplitMix64 expansion of a `(seed, stream_id)`
//! pair, so distinct stream ids give independent sequences by construction
//! and identical pairs reproduce bit-identical draws on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::ImageField;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        let mut words = [0u64; 4];
        words[0] = splitmix64(&mut state);
        words[1] = splitmix64(&mut state);
        state ^= stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x2545_F491_4F6C_DD1D);
        words[2] = splitmix64(&mut state);
        words[3] = splitmix64(&mut state);
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        RandomStream { seed, stream_id, rng: ChaCha12Rng::from_seed(key) }
    }

    /// Derives an independent child stream, e.g. one per replicate or chain.
    pub fn substream(&self, child_id: u64) -> Self {
        let mut state = self.stream_id ^ child_id.rotate_left(17);
        let folded = splitmix64(&mut state) ^ child_id;
        RandomStream::new(self.seed, folded)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        use rand::Rng as _;
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        bits as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection sampling over the top bits keeps the draw unbiased.
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn normal_field(&mut self, rows: usize, cols: usize) -> ImageField {
        let values = (0..rows * cols).map(|_| self.normal()).collect();
        ImageField::from_values(rows, cols, values).expect("normal draws are finite")
    }

    /// `k` distinct indices drawn uniformly from `[0, n)`, sorted.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        // Floyd's algorithm
        let mut chosen = std::collections::BTreeSet::new();
        for j in n - k..n {
            let t = self.below(j + 1);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        chosen.into_iter().collect()
    }
}
