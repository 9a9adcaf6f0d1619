//! Seed bookkeeping.
//!
//! Every random choice in the crate (masks, noise realizations, corpus
//! jitter, waveform labels) flows from a named seed through one fixed,
//! versioned PRNG so that artifacts can be reconstructed bit-exactly from
//! their recorded seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// PRNG identifier recorded in persisted artifacts.
pub const PRNG_NAME: &str = "chacha8";

/// The one generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a stream index
/// (SplitMix64 finalizer). Used to give each utterance, sweep cell or repeat
/// its own noise stream while keeping the whole run a function of one seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
