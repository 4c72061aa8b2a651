//! Seeded random streams. Every replicate or chain gets its own ChaCha8
//! stream keyed by `(seed, stream index)`, so results do not depend on how
//! work is scheduled across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Name recorded in reports next to the seed.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9) seeded per stream; bootstrap replicate i uses stream i, prosecution chain stream 0, defence chain stream 1";

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
