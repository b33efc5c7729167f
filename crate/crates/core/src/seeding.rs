//! Deterministic RNG streams fanned out from a single run seed.
//!
//! Every random decision in the pipeline draws from a ChaCha8 stream keyed
//! by `(seed, stage label, index)`. ChaCha8 has a fixed, portable
//! specification, so identical seeds produce identical artifacts on every
//! platform. The label keeps stages (placement, rendering noise, parameter
//! init, shuffling, ...) independent: inserting draws into one stage never
//! shifts another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a 64-bit hash; fixed constants, used only to mix stage labels
/// into the stream key.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// RNG for stage `label`, substream `index`, under the global `seed`.
///
/// The 256-bit ChaCha key is `seed || fnv1a64(label) || index || 0`,
/// all little-endian.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(label.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
