//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, domain, frame, counter)`, so results do
//! not depend on evaluation order or on how work is split across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Words reserved per counter slot; a normal draw needs one or two.
const SLOT_WORDS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    PixelNoise = 1,
    PayloadBits = 2,
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: [u8; 32],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
        }
    }

    fn positioned(&self, domain: Domain, frame: u64, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((domain as u64) << 56) ^ frame);
        rng.set_word_pos((counter as u128) << SLOT_WORDS);
        rng
    }

    /// Standard normal draw for `(frame, counter)`.
    pub fn normal(&self, frame: u64, counter: u64) -> f64 {
        self.positioned(Domain::PixelNoise, frame, counter)
            .sample(StandardNormal)
    }

    /// Equiprobable payload bits for one frame.
    pub fn bits(&self, frame: u64, count: usize) -> Vec<bool> {
        let mut rng = self.positioned(Domain::PayloadBits, frame, 0);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let word = rng.next_u64();
            let take = (count - out.len()).min(64);
            out.extend((0..take).map(|i| (word >> i) & 1 == 1));
        }
        out
    }
}
