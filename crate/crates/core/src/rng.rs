//! Deterministic random streams.
//!
//! A run owns one ChaCha stream identified by `(seed, stream)`. Ensemble
//! trajectories use `stream = index`, which keeps results independent of
//! scheduling and lets any single trajectory be replayed from its pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The stream for a given seed and stream index.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in the open interval `(0, 1)`.
pub fn draw_open01(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}
