//! Seeded, stream-addressable random number generation.
//!
//! Every random draw in the crate comes from a [`SeededRng`] identified by a
//! `(master_seed, stream_index)` pair. Stream indices for sub-tasks are
//! derived with a stable hash of a task label and an ordinal, so results do
//! not depend on how work is scheduled across threads.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SeededRng {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        SeededRng {
            master_seed,
            stream_index,
            inner,
        }
    }

    /// Root stream for a master seed.
    pub fn from_seed(master_seed: u64) -> Self {
        Self::new(master_seed, 0)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Stream index of the child task `(kind, ordinal)` below this stream.
    pub fn child_stream(&self, kind: &str, ordinal: u64) -> u64 {
        stream_key(self.stream_index, kind, ordinal)
    }

    /// Fresh generator for the child task `(kind, ordinal)`. Does not advance `self`.
    pub fn derive(&self, kind: &str, ordinal: u64) -> SeededRng {
        SeededRng::new(self.master_seed, self.child_stream(kind, ordinal))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// One draw from N(mean, variance). `variance` must be non-negative.
    pub fn normal(&mut self, mean: f64, variance: f64) -> f64 {
        debug_assert!(variance >= 0.0);
        mean + variance.sqrt() * self.standard_normal()
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::gen::<f64>(&mut self.inner)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..upper`.
    pub fn below(&mut self, upper: usize) -> usize {
        rand::Rng::gen_range(&mut self.inner, 0..upper)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), RandError> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Draws `count` independent samples from N(mean, variance).
///
/// `variance` is a variance, not a standard deviation.
pub fn gaussian(rng: &mut SeededRng, mean: f64, variance: f64, count: usize) -> Result<Vec<f64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian variance must be finite and >= 0, got {variance}"
        )));
    }
    if !mean.is_finite() {
        return Err(Error::invalid(format!("gaussian mean must be finite, got {mean}")));
    }
    Ok((0..count).map(|_| rng.normal(mean, variance)).collect())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable stream index for `(parent, kind, ordinal)`. Independent of platform and build.
pub fn stream_key(parent: u64, kind: &str, ordinal: u64) -> u64 {
    let h = splitmix64(parent ^ fnv1a(kind.as_bytes()));
    splitmix64(h ^ splitmix64(ordinal.wrapping_add(0x632b_e59b_d9b4_e019)))
}
