//! Counter-addressed random streams.
//!
//! Each draw is located by `(master seed, stream, round)`, so two policies run
//! with the same seed see the same attacker moves, task sequence and noise no
//! matter how many numbers each policy consumes on its own stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Attacker = 1,
    Tasks = 2,
    Noise = 3,
    Policy = 4,
}

/// Words reserved per round inside a stream (2^20).
const ROUND_SHIFT: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Generator positioned at the start of round `t` on `stream`.
    pub fn round_rng(&self, stream: Stream, t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream as u64);
        rng.set_word_pos(u128::from(t) << ROUND_SHIFT);
        rng
    }
}
