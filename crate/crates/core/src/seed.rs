//! Per-stage seed derivation.
//!
//! Every stochastic step draws from a ChaCha8 stream seeded with
//! `derive(base, stage)`: the first eight bytes (little endian) of
//! `SHA-256(base as 8 LE bytes || stage)`. Stage names are fixed strings such
//! as `"slpa/CAS"` or `"classifier/shuffle"`.

use sha2::{Digest, Sha256};

pub fn derive(base: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// SHA-256 of a byte string as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
