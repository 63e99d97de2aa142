//! Deterministic substream derivation.
//!
//! Every randomized routine takes a single `u64` seed and derives one
//! independent ChaCha stream per (label, index) pair. Parallel loops seed each
//! iteration from its own index, so results do not depend on thread count or
//! scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// A ChaCha stream keyed by `(seed, label, index)`.
///
/// Streams with distinct keys are independent for practical purposes; the same
/// key always yields the same stream.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a(label.as_bytes()).rotate_left(17) ^ index.wrapping_mul(0xA24B_AED4_963E_E407);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stable 64-bit fingerprint of arbitrary bytes, used to stamp reports with a
/// config hash.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    fnv1a(bytes)
}
