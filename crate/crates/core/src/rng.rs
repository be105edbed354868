//! Counter-based noise streams.
//!
//! Every trajectory draws from its own ChaCha8 keystream: the key is derived from
//! the run seed and the 64-bit stream id is the trajectory index. The block counter
//! advances with the draws, so `(seed, index)` fixes the whole sequence regardless of
//! which worker integrates the path or in which order paths are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Stream ids at the top of the index range are reserved for auxiliary draws
/// (resampling choices, bridge refinements) so they never collide with paths.
pub const AUXILIARY_STREAM_BASE: u64 = u64::MAX - 1024;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    seed: u64,
    index: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng.set_word_pos(0);
        Self { rng, seed, index }
    }

    /// Auxiliary stream `k` for the given seed.
    pub fn auxiliary(seed: u64, k: u64) -> Self {
        Self::new(seed, AUXILIARY_STREAM_BASE + k)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Fills `out` with independent `N(0, std_dev²)` draws.
    pub fn fill_gaussian(&mut self, out: &mut [f64], std_dev: f64) {
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v = std_dev * z;
        }
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform index in `0..n` (`n > 0`), rejection-free via 128-bit multiply.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
