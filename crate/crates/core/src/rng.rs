//! Reproducible random streams.
//!
//! Every Monte Carlo replication owns a stream derived from a master seed
//! and a stream index, so results do not depend on thread count or on the
//! order in which replications are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream_id` under `master_seed`.
///
/// `splitmix64(master ^ splitmix64(stream_id))`: distinct streams of one
/// master seed and the same stream of distinct master seeds decorrelate.
pub fn stream_seed(master_seed: u64, stream_id: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(stream_id))
}

/// A ChaCha8 generator bound to `(master_seed, stream_id)`.
///
/// Identical pairs reproduce identical draws bit for bit.
#[derive(Clone, Debug)]
pub struct SeededRng {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id, inner: ChaCha8Rng::seed_from_u64(stream_seed(master_seed, stream_id)) }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh generator for a sub-stream, e.g. one replication of an
    /// experiment whose master stream is `self`.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(stream_seed(self.master_seed, self.stream_id), index)
    }
}

impl RngCore for SeededRng {
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
