//! Deterministic random source.
//!
//! Every random draw in the crate goes through [`DetRng`], a SplitMix64
//! generator (Steele, Lea & Flood 2014; reference C code at
//! <http://xoshiro.di.unimi.it/splitmix64.c>) with two fixed derivations
//! layered on top so another implementation can reproduce traces bit for bit:
//!
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, a uniform double in `[0, 1)`.
//! * `below(n)`: `((next_u64() as u128 * n as u128) >> 64) as u64`, an
//!   integer in `[0, n)` by multiply-shift (bias below `n / 2^64`).
//!
//! Seeds for independent streams are derived with [`derive_seed`].

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

const F64_UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct DetRng(SplitMix64);

impl DetRng {
    pub fn new(seed: u64) -> Self {
        DetRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * F64_UNIT
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `count` distinct integers from `[lo, hi]` (inclusive) by Floyd's
    /// algorithm, returned sorted.
    pub fn sample_distinct(&mut self, lo: u64, hi: u64, count: usize) -> Vec<u64> {
        let span = hi - lo + 1;
        debug_assert!(count as u64 <= span);
        let mut chosen = std::collections::BTreeSet::new();
        for j in (span - count as u64)..span {
            let t = self.below(j + 1);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        chosen.into_iter().map(|x| x + lo).collect()
    }
}

/// Stable seed derivation: folds each tag into the seed with one SplitMix64
/// output step, `h <- splitmix64_next(state = h ^ tag)`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(base, |h, &tag| DetRng::new(h ^ tag).next_u64())
}
