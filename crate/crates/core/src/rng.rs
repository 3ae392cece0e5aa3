//! Deterministic random streams keyed by `(seed, tag)`.
//!
//! Each stream is a ChaCha8 generator seeded from `seed` with the stream
//! number taken from an FNV-1a hash of the tag, so equal pairs replay the same
//! sequence and different tags give non-overlapping sequences.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

pub fn rng_stream(seed: u64, tag: &str) -> RandomStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(fnv1a(tag.as_bytes()));
    RandomStream { inner }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

impl RandomStream {
    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn gaussian(&mut self, mean: f64, std_dev: f64) -> f64 {
        // Config validation guarantees a finite, non-negative std_dev.
        Normal::new(mean, std_dev)
            .expect("finite non-negative standard deviation")
            .sample(&mut self.inner)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. `n` must be non-zero.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
