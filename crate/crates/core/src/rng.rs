//! Seeded random streams.
//!
//! Every run draws from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`; the environment and the learner each get their own
//! stream of that generator, so they never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ENVIRONMENT_STREAM: u64 = 0;
pub const LEARNER_STREAM: u64 = 1;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
