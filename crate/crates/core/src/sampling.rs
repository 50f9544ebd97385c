//! Seeded, splittable random streams.
//!
//! Every consumer derives its generator from `(seed, stream)`, so a sample
//! set does not depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Stream offsets that keep independent experiment phases apart.
pub mod streams {
    pub const CONSTANTS: u64 = 0;
    pub const VERIFY: u64 = 1 << 40;
    pub const TRIALS: u64 = 2 << 40;
    pub const STABLE_TRIALS: u64 = 3 << 40;
    pub const GENERIC: u64 = 4 << 40;
}

pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
