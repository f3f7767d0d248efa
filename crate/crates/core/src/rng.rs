//! Seeded random substreams: one ChaCha stream per path index under a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator owned by a single path.
pub type PathRng = ChaCha8Rng;

/// Independent substream `stream` of the master `seed`.
pub fn substream(seed: u64, stream: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed for a named purpose, so that unrelated draws never share a stream.
pub fn child_seed(seed: u64, purpose: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
