//! Reproducible random streams.
//!
//! The generator is pinned to ChaCha8 (via `rand_chacha`): the 64-bit master
//! seed is expanded into the 256-bit key with `SeedableRng::seed_from_u64`,
//! and the stream index selects the ChaCha stream (nonce). Streams with
//! distinct indices are disjoint counter-mode keystreams, so every trajectory
//! or sample gets its own stream without any coordination between workers.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat).
//! Changing either choice changes every Monte Carlo output of the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Identifies one independent stream of random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RandomSource {
            master_seed,
            stream_index,
        }
    }

    /// The same master seed, another stream.
    pub fn with_stream(self, stream_index: u64) -> Self {
        RandomSource {
            stream_index,
            ..self
        }
    }

    /// Start the stream from its beginning.
    pub fn stream(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_index);
        StreamRng { inner }
    }
}

/// A running random stream. Not `Clone`, so a stream cannot silently fork.
#[derive(Debug)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Standard normal variate.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform variate on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }
}
