//! Deterministic RNG stream derivation.
//!
//! Every source of randomness in the crate is a ChaCha8 stream keyed by
//! `(seed, domain tag, index)`, so parallel work over columns or grid points
//! produces schedule-independent results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_PROFILE_NOISE: u64 = 1;
pub(crate) const TAG_DATASET_COLUMN: u64 = 2;
pub(crate) const TAG_DICT_INIT: u64 = 3;
pub(crate) const TAG_LEARN_ORDER: u64 = 4;
pub(crate) const TAG_MINIBATCH: u64 = 5;
pub(crate) const TAG_CLASSIFIER: u64 = 6;
pub(crate) const TAG_SUBSAMPLE: u64 = 7;

/// Derive an independent ChaCha8 stream from `(seed, tag, index)`.
pub(crate) fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
