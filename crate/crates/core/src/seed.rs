//! Seed splitting.
//!
//! One master seed fans out to every stage and repetition. A child seed is the
//! first eight bytes (little endian) of `SHA-256(master ‖ name ‖ index)`, with
//! `master` and `index` encoded as little-endian `u64`. The rule is stable
//! across platforms and crate versions, so reports can be reproduced from the
//! master seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive(master: u64, name: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed of repetition `repetition` within the scenario at `fraction_index`.
pub fn repetition(master: u64, fraction_index: usize, repetition: usize) -> u64 {
    derive(
        master,
        "repetition",
        ((fraction_index as u64) << 32) | repetition as u64,
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
