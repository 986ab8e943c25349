//! Seeded random streams.
//!
//! Every run derives independent ChaCha streams from `(seed, purpose)`, so noise draws,
//! design draws and instance generation never share state and results do not depend on the
//! order in which parallel runs execute. The stream id is the purpose's discriminant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Instance = 1,
    Noise = 2,
    DesignDraws = 3,
    Policy = 4,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}
