//! Deterministic seed derivation.
//!
//! Every randomized stage of the pipeline draws from a [`ChaCha8Rng`] whose
//! seed is derived from the run seed plus a fixed stream of context words
//! (record index, training step, purpose tag). Derivation is a splitmix64
//! chain, so the same (seed, context) always yields the same stream on every
//! platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep unrelated streams (data draws, step kinds, validation)
/// independent even when the remaining context words collide.
pub mod stream {
    pub const DATASET_RECORD: u64 = 0x01;
    pub const DATASET_SPLIT: u64 = 0x02;
    pub const OCCUPANCY: u64 = 0x03;
    pub const KMEANS: u64 = 0x04;
    pub const PARAM_INIT: u64 = 0x05;
    pub const TRAIN_DATA: u64 = 0x06;
    pub const TRAIN_KIND: u64 = 0x07;
    pub const VALIDATION: u64 = 0x08;
    pub const GENERATE: u64 = 0x09;
    pub const EVAL_SAMPLING: u64 = 0x0a;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with context words into a single 64-bit seed.
pub fn derive_seed(base: u64, context: &[u64]) -> u64 {
    let mut state = base ^ 0x6a09_e667_f3bc_c908;
    let mut out = splitmix64(&mut state);
    for &word in context {
        state ^= word;
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 generator for the given (seed, context).
pub fn rng_from(base: u64, context: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, context))
}

/// Hash arbitrary bytes into a context word (FNV-1a). Used to derive
/// per-record streams from record ids.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
