//! Deterministic per-trajectory random streams.
//!
//! Every Monte Carlo trajectory draws from its own ChaCha stream selected by
//! `(base seed, trajectory index)`, so results do not depend on how the work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

pub fn stream(base_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}
