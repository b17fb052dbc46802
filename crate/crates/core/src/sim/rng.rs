//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose 256-bit
//! key is derived from a user seed and a tuple of indices (replication,
//! example, purpose, ...). Two calls with the same seed and key see the same
//! stream no matter which thread runs them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes, mixed into the key so unrelated draws never collide.
pub mod purpose {
    pub const DIRECT_VOTERS: u64 = 1;
    pub const WORLD_SAMPLE: u64 = 2;
    pub const VOTE: u64 = 3;
    pub const REPLICATION: u64 = 4;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, key...)`.
pub fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for (pos, &k) in key.iter().enumerate() {
        h = splitmix(h ^ splitmix(k.wrapping_add((pos as u64) << 56)));
    }
    let mut bytes = [0u8; 32];
    for (lane, chunk) in bytes.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix(h.wrapping_add(lane as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
