//! Brute-force reference implementations and synthetic inputs.
//!
//! Nothing here shares code with the algorithms under test; the oracles are
//! written straight from the definitions and favor clarity over speed.

pub mod fixtures;
pub mod oracle;

pub use rand;
pub use rand_chacha::ChaCha8Rng;

use rand::SeedableRng;

/// Reproducible generator for a named scenario.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
