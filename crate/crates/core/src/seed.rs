//! Labeled seed derivation. Every random stream in the crate is seeded from a
//! parent seed plus a label, so sub-results can be reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive(parent: u64, label: &str) -> u64 {
    derive_with(parent, label, &[])
}

pub fn derive_with(parent: u64, label: &str, extra: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(extra);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
