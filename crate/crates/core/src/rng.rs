//! Deterministic random number generation.
//!
//! Every source of randomness in this crate flows through [`SeededRng`], a
//! thin wrapper around ChaCha8 that exposes exactly the primitives the
//! optimizer needs: uniform doubles and Gaussian deviates. ChaCha8 has a
//! fully specified output stream, and `seed_from_u64` expands the seed with
//! SplitMix64, so a given seed yields the same draws on every platform.
//!
//! Normal deviates use the Box-Muller transform rather than a library
//! sampler so that the sample stream is pinned by this crate alone.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Seeded, platform-stable random source.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    seed: u64,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
            spare_normal: None,
        }
    }

    /// Seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)` using the top 53 bits of one `u64`.
    pub fn next_uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_uniform() * (hi - lo)
    }

    /// Standard normal deviate via Box-Muller.
    ///
    /// Deviates are produced in pairs; the second of each pair is cached and
    /// returned by the next call, so draw order alone determines the stream.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u places the value in (0, 1], keeping ln() finite.
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Normal deviate with the given mean and standard deviation.
    pub fn next_normal_with(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.next_normal()
    }
}

/// Derives an independent stream seed from a base seed and a stream index.
///
/// Two SplitMix64 mixes decorrelate nearby bases (batch runs use
/// `base + run_index`) and nearby stream indices (per-evaluation seeds).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
