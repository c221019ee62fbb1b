//! Seeded random streams. Every consumer derives its own stream from the
//! problem seed and a fixed purpose tag, so results do not depend on the
//! order in which streams are opened or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags; the high half of the ChaCha stream id.
pub mod purpose {
    pub const LANGEVIN_INIT: u32 = 1;
    pub const LANGEVIN_NOISE: u32 = 2;
    pub const PERTURBATION: u32 = 3;
    pub const PL_SCAN: u32 = 4;
    pub const STABILITY: u32 = 5;
    pub const PROPERTY: u32 = 6;
}

/// Independent stream `(purpose, index)` under `seed`.
pub fn stream(seed: u64, purpose: u32, index: u32) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}
