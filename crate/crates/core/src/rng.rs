//! Seeded random sources.
//!
//! Every random draw in the crate goes through an explicitly constructed
//! [`RandomSource`]; nothing touches thread-local or OS randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator injected wherever randomness is needed.
pub type RandomSource = ChaCha8Rng;

pub fn random_source(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> RandomSource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function. A bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of item `index` from `base`.
///
/// This is the `index + 1`-th output of a SplitMix64 generator started at
/// `base`: `splitmix64(base + (index + 1) * GOLDEN_GAMMA)`. Because the odd
/// gamma makes the pre-images distinct for every index below 2^64 and the
/// finalizer is a bijection, distinct indices always map to distinct seeds.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
