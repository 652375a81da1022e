//! Seeded, stream-splittable randomness.
//!
//! Every stochastic component takes an owned `RngState`. Child states are
//! derived with `split`, so parallel trials draw independent streams from a
//! single master seed and one trial can be re-run in isolation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Uniform};

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha12Rng,
}

/// splitmix64 finalizer; decorrelates child seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream; deterministic in (seed, tag).
    pub fn split(&self, tag: u64) -> RngState {
        RngState::new(mix(self.seed ^ mix(tag)))
    }

    /// Splits by a string label (hashed with FNV-1a).
    pub fn split_label(&self, label: &str) -> RngState {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        self.split(h)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        Normal::new(mean, std).expect("std must be finite").sample(&mut self.rng)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        Uniform::new(lo, hi).expect("bad range").sample(&mut self.rng)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random_range(0.0..1.0) < p
    }
}
