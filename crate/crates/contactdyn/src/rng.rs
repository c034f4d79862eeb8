//! Seed plumbing. All randomness in the crate flows from one root seed
//! through named substreams so that components can be reseeded independently
//! without perturbing each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG for a named substream of a root seed.
///
/// ChaCha8 is portable across platforms, so seeded byte streams are stable.
pub fn substream(root_seed: u64, name: &str) -> ChaCha8Rng {
    substream_indexed(root_seed, name, 0)
}

/// Like [`substream`] but with an extra index, e.g. one stream per trajectory
/// or per epoch.
pub fn substream_indexed(root_seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(name.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
