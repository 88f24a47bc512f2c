//! Named random sub-streams derived from one master seed.
//!
//! Arrival, cost and service draws each come from their own ChaCha stream so
//! that two policies run with the same seed face identical environment
//! realizations (common random numbers). Policies get a fourth stream for
//! their own coin flips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Arrival = 0,
    Cost = 1,
    Service = 2,
    Policy = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

#[derive(Clone, Debug)]
pub struct RunStreams {
    pub arrival: ChaCha8Rng,
    pub cost: ChaCha8Rng,
    pub service: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            arrival: stream(seed, Stream::Arrival),
            cost: stream(seed, Stream::Cost),
            service: stream(seed, Stream::Service),
            policy: stream(seed, Stream::Policy),
        }
    }
}
