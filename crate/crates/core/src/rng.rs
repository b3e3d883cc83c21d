//! Seeded, stream-separated randomness.
//!
//! Every run owns one [`RunRng`]. Each consumer (noise channel, agent
//! exploration, evaluation rollouts, network initialisation, environment
//! dynamics, critic minibatching) draws from its own ChaCha stream derived from the run seed, so
//! changing how often one consumer draws never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Noise = 1,
    Agent = 2,
    Evaluation = 3,
    Init = 4,
    Dynamics = 5,
    Data = 6,
    Critic = 7,
}

#[derive(Debug, Clone, Copy)]
pub struct RunRng {
    seed: u64,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// A child generator for nested runs (e.g. one per sweep cell).
    pub fn split(&self, index: u64) -> RunRng {
        // splitmix64 finaliser
        let mut z = self.seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RunRng::new(z ^ (z >> 31))
    }
}
