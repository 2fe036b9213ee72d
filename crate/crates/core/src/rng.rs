//! Deterministic seed fan-out.
//!
//! Every random draw in the toolkit flows from a `u64` seed through a
//! counter-independent hash, so adding trials or reordering work never
//! perturbs existing draws. ChaCha is used for its portable, reproducible
//! stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a base seed and a purpose label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
}

/// Seed of one Monte-Carlo trial under a master seed.
pub fn trial_seed(master: u64, trial_index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(b"trial");
    hasher.update(trial_index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
}

/// Portable deterministic generator for a given seed.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
