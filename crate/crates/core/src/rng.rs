//! Seeded, splittable random streams.
//!
//! Every experiment derives all randomness from one master seed. Stream 0
//! builds the system; stream `1 + t` drives trial `t`. ChaCha is counter
//! based, so streams are independent and trials can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SkmRng = ChaCha8Rng;

pub const SYSTEM_STREAM: u64 = 0;

pub fn stream(seed: u64, stream: u64) -> SkmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn trial_stream(seed: u64, trial: usize) -> SkmRng {
    stream(seed, 1 + trial as u64)
}
