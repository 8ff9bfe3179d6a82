//! Seed-stream derivation.
//!
//! Every source of randomness in a run is a `ChaCha8Rng` derived from the
//! experiment seed and a stream tag, so clients can be updated in any order
//! (or in parallel) without changing the draws any of them sees.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalization step; decorrelates structured tag values.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mix a seed with a stream tag into a new 64-bit seed.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Independent reproducible stream for (seed, tag).
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// Stream tags used by the harness and sweep runner. Values are arbitrary
/// but fixed: changing them changes every seeded result.
pub mod tags {
    pub const SELECTION: u64 = 0x5e1ec7;
    pub const CLIENT_NOISE_BASE: u64 = 0xc11e47_0000;
    pub const PARTITION: u64 = 0x9a47;
    pub const SYNTH_DATA: u64 = 0xda7a;
    pub const SWEEP_CELL: u64 = 0x57ee9;
}

/// Per-client noise stream tag.
pub fn client_tag(client: usize) -> u64 {
    tags::CLIENT_NOISE_BASE ^ (client as u64)
}
