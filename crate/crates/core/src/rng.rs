//! Named RNG streams derived from a single master seed.
//!
//! Every subsystem draws from its own ChaCha stream so that, for example,
//! extra draws in the learners never shift the fading or drop sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology = 1,
    Drop = 2,
    Shadowing = 3,
    Fading = 4,
    Learning = 5,
}

/// Independent generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
