//! Deterministic random streams.
//!
//! A stream is keyed by `(master_seed, replicate_id, purpose_tag)`: the key
//! is hashed with SHA-256 and the digest seeds a ChaCha8 generator. Streams
//! never share state, so results do not depend on how replicates are
//! scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Identifier recorded in run manifests.
pub const DERIVATION_RULE: &str = "sha256(\"degenbranch/stream/v1\" | seed_le | replicate_le | tag) -> chacha8";

pub fn derive_stream(master_seed: u64, replicate_id: u64, purpose_tag: &str) -> Stream {
    let mut h = Sha256::new();
    h.update(b"degenbranch/stream/v1");
    h.update(master_seed.to_le_bytes());
    h.update(replicate_id.to_le_bytes());
    h.update((purpose_tag.len() as u64).to_le_bytes());
    h.update(purpose_tag.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Packs an experiment coordinate into a single replicate id.
pub fn replicate_key(scale_index: usize, box_index: usize, replicate: u64) -> u64 {
    debug_assert!(replicate < 1 << 32);
    ((scale_index as u64) << 40) | ((box_index as u64) << 32) | replicate
}
