//! Seeded randomness. Every stochastic component draws through a
//! [`NoiseSource`] so tests can stub the noise out entirely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Independent random streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Network = 0,
    Plant = 1,
    Measurement = 2,
    Jitter = 3,
}

/// A ChaCha8 generator for `(seed, stream)`. Streams of one seed never overlap.
pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Seed of Monte Carlo run `index`: a SplitMix64 finalizer applied to
/// `base + (index + 1)·φ64`. Fixed across versions.
pub fn derive_run_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub trait NoiseSource {
    /// One draw from N(0, 1).
    fn standard_normal(&mut self) -> f64;

    /// One draw from U[lo, hi].
    fn uniform(&mut self, lo: f64, hi: f64) -> f64;

    /// Uniform index in `0..n`.
    fn index(&mut self, n: usize) -> usize;
}

/// Gaussian noise backed by a real generator.
#[derive(Debug, Clone)]
pub struct Gaussian<R>(pub R);

impl<R: Rng> NoiseSource for Gaussian<R> {
    fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            lo
        } else {
            self.0.random_range(lo..=hi)
        }
    }

    fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

impl Gaussian<SimRng> {
    pub fn seeded(seed: u64, stream: Stream) -> Self {
        Gaussian(stream_rng(seed, stream))
    }
}

/// Noise stub: every normal draw is zero, uniforms return the lower bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl NoiseSource for Silent {
    fn standard_normal(&mut self) -> f64 {
        0.0
    }

    fn uniform(&mut self, lo: f64, _hi: f64) -> f64 {
        lo
    }

    fn index(&mut self, _n: usize) -> usize {
        0
    }
}
