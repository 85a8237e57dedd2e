//! Seeded random number generation shared by noise synthesis and Monte-Carlo calibration.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name and version of the generator, recorded in run reports.
pub const GENERATOR_NAME: &str = "ChaCha20Rng (rand_chacha 0.9) + StandardNormal (rand_distr 0.5)";

/// Generator for the main stream of `seed`.
pub fn seeded(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent generator for sub-stream `stream` of `seed`, used for parallel repetitions.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}
