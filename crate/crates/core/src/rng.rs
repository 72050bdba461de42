//! Deterministic random number generation.
//!
//! Every random draw in the simulator comes from ChaCha20 (`rand_chacha::ChaCha20Rng`),
//! keyed directly by the 32-byte little-endian concatenation
//! `seed || stream || a || b`. Distinct `(seed, stream, a, b)` tuples therefore select
//! independent keystreams, and the output is identical on every platform. This
//! derivation is part of the reproducibility contract and must not change.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Named substreams. The discriminant is written into the ChaCha key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    /// Pairwise key material, indexed by (block, tree edge index).
    PairwiseKd = 1,
    /// Per-round announcement masks, indexed by (block, 0).
    Masks = 2,
    /// Leader's terminal choices, indexed by (block, 0).
    TerminalChoice = 3,
    /// Leader's check-position selection, indexed by (block, 0).
    CheckPositions = 4,
    /// Leader's random codeword, indexed by (block, 0).
    Codeword = 5,
    /// Free-form stream for tests and experiments.
    Auxiliary = 6,
}

/// A seeded, single-owner ChaCha20 generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    /// Root generator for `seed` (equivalent to `derive(seed, Stream::Auxiliary, 0, 0)`).
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, Stream::Auxiliary, 0, 0)
    }

    /// Independent substream for `(seed, stream, a, b)`.
    pub fn derive(seed: u64, stream: Stream, a: u64, b: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
        key[16..24].copy_from_slice(&a.to_le_bytes());
        key[24..32].copy_from_slice(&b.to_le_bytes());
        SeededRng {
            seed,
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A uniform bit.
    pub fn bit(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// `true` with probability `p`. `p <= 0` never fires.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        // 53-bit uniform in [0, 1)
        let u = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u < p
    }

    /// Uniform integer in `[0, bound)`. Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        self.inner.random_range(0..bound)
    }

    /// Uniform index into a slice of length `len`.
    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }
}
