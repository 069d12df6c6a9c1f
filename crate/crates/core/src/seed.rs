//! Deterministic per-entity random streams.
//!
//! Every random object is drawn from its own stream, keyed by the master
//! seed, the entity ids and a purpose tag. Generation order therefore never
//! changes the output, which is what lets corpora be built in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
pub mod tag {
    pub const PATCH_GEOMETRY: u64 = 0x6765_6f6d;
    pub const PHASE_FIELD: u64 = 0x7068_6173;
    pub const SESSION: u64 = 0x7365_7373;
    pub const DIRECTION: u64 = 0x6469_7263;
    pub const FADING: u64 = 0x6661_6465;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const INIT: u64 = 0x696e_6974;
    pub const SHUFFLE: u64 = 0x7368_7566;
}

/// One step of the splitmix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed` one word at a time.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_stream(seed: u64, parts: &[u64]) -> StreamRng {
    stream(derive(seed, parts))
}
