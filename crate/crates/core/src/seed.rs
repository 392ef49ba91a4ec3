//! Seed splitting.
//!
//! Every random stage draws from a ChaCha8 stream seeded by
//! `derive_seed(base, stage, index)`: the first eight bytes, little endian, of
//! `SHA-256(base.to_le_bytes() || stage || 0x00 || index.to_le_bytes())`.
//! Stage names in use: `"kfold"`, `"noise"`, `"fbm"`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(base: u64, stage: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stage_rng(base: u64, stage: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stage, index))
}
