//! Stable seed derivation.
//!
//! Every random stream in the crate is a ChaCha generator seeded from a
//! 64-bit value. Child seeds are derived from a parent seed and an index by
//! hashing, so a replication's stream depends only on its coordinates and
//! never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the crate.
pub type Rng = ChaCha20Rng;

/// Derive a child seed from `parent` and `index`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"ssl-genlab/seed");
    h.update(parent.to_le_bytes());
    h.update(index.to_le_bytes());
    first_u64(&h.finalize())
}

/// Derive a child seed from `parent` and a label, for named sub-streams.
pub fn derive_named(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"ssl-genlab/named");
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    first_u64(&h.finalize())
}

/// 64-bit hash of an arbitrary byte string (used for provenance).
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    first_u64(&Sha256::digest(bytes))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn first_u64(digest: &[u8]) -> u64 {
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(buf)
}
