//! Keyed deterministic RNG streams.
//!
//! Every random draw in the pipeline comes from a stream keyed by the values
//! that identify it (seed, round, prompt id, candidate index), so results do
//! not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builds a key from heterogeneous parts; each part is length-prefixed.
#[derive(Debug, Clone, Default)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(domain: &str) -> Self {
        StreamKey::default().str(domain)
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.hasher.update([8u8]);
        self.hasher.update(v.to_le_bytes());
        self
    }

    pub fn str(mut self, s: &str) -> Self {
        self.hasher.update((s.len() as u64).to_le_bytes());
        self.hasher.update(s.as_bytes());
        self
    }

    pub fn rng(self) -> ChaCha8Rng {
        let digest = self.hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}
