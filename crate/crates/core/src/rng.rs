//! Seed fan-out. Every random stream in the crate is derived from a single
//! top-level seed plus a fixed per-purpose stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod stream {
    pub const GIBBS: u64 = 1;
    pub const HOLDOUT: u64 = 2;
    pub const SYNTH_CORPUS: u64 = 3;
    pub const SYNTH_PAIR: u64 = 4;
    pub const SYNTH_TRUTH: u64 = 5;
    pub const SYNTH_ROLES: u64 = 6;
    pub const SYNTH_INTERACTIONS: u64 = 7;
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
