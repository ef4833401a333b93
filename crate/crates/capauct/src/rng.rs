//! Seeding scheme: every random quantity in the crate flows from one root
//! seed through a documented split. A (root, stream id) pair is mixed with
//! SplitMix64 into the seed of an independent ChaCha8 stream, so simulation
//! batches, tie-breaking, and sampling stay reproducible and decoupled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the crate's random consumers.
pub mod stream {
    /// Value sampling in `dist::sample`.
    pub const SAMPLE: u64 = 0x01;
    /// Profile draws in revenue estimation.
    pub const PROFILES: u64 = 0x02;
    /// Tie-breaking among equal bids.
    pub const TIEBREAK: u64 = 0x03;
    /// Randomized rule generation in tests and reports.
    pub const RULES: u64 = 0x04;
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the sub-seed for `stream_id` from a root seed.
pub fn substream(root: u64, stream_id: u64) -> u64 {
    splitmix64(root ^ splitmix64(stream_id))
}

/// A ChaCha8 generator for the given root seed and stream id.
pub fn rng_for(root: u64, stream_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(root, stream_id))
}
