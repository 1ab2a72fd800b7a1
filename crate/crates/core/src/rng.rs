//! Seeded pseudo-random source shared by every stochastic routine.
//!
//! ChaCha8 is used because its output stream is fixed by the seed alone,
//! independent of platform and crate features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
