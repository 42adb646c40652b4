//! Seeded randomness for every stochastic component.
//!
//! All draws come from ChaCha8 streams, so a run is reproducible from its
//! u64 seed alone. The variate transforms (Box-Muller for Gaussians,
//! Fisher-Yates for shuffles, rejection sampling for bounded indices) are
//! implemented here rather than pulled from a distributions crate, keeping
//! the byte-stream-to-sample mapping owned by this crate so serialized
//! artifacts stay bit-reproducible across dependency upgrades.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::scalar::Real;

/// Deterministic random source backed by ChaCha8.
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    /// Creates the primary stream for `seed`.
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: ChaCha8Rng::seed_from_u64(seed), spare_normal: None }
    }

    /// Creates an independent substream of `seed`. Components that must not
    /// perturb each other's draw sequences (dictionary init vs. epoch
    /// shuffling, for example) take distinct stream ids.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { inner, spare_normal: None }
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the Box-Muller transform. Pairs are computed
    /// in `f64` and narrowed to the working precision on return.
    pub fn standard_normal<T: Real>(&mut self) -> T {
        if let Some(z) = self.spare_normal.take() {
            return T::of(z);
        }
        // 1 - u keeps the radius argument strictly positive.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        T::of(radius * angle.cos())
    }

    /// Uniform index in `[0, bound)`, unbiased via rejection sampling.
    pub fn index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "index bound must be positive");
        let bound = bound as u64;
        // Largest multiple of `bound` representable in u64; draws at or
        // above it would bias the modulus and are rejected.
        let limit = (u64::MAX / bound) * bound;
        loop {
            let v = self.inner.next_u64();
            if v < limit {
                return (v % bound) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
