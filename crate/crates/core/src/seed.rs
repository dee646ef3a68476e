//! Seed derivation.
//!
//! Every random choice made by a run flows from one user seed. Each consumer
//! gets its own sub-seed, computed as the first eight bytes (little endian) of
//! `SHA-256(le_bytes(seed) || purpose)`, so that for instance the subset draw
//! of an analysis does not change when the sampler settings change.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha20Rng;

pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, purpose: &str) -> Rng {
    rng_from_seed(derive_seed(seed, purpose))
}
