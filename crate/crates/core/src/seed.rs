//! Deterministic random substreams.
//!
//! Every random decision in a run draws from a ChaCha stream whose seed is
//! derived from the run seed plus a stage tag and coordinates. Results then
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stage a substream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Randomize = 1,
    Shuffle = 2,
    Estimate = 3,
    Synth = 4,
    Trial = 5,
    Arrival = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with a stage tag and two coordinates.
pub fn derive(seed: u64, stage: Stage, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed ^ (stage as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

pub fn stream(seed: u64, stage: Stage, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stage, a, b))
}
