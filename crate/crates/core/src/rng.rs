//! Counter-based Gaussian streams.
//!
//! Each `(seed, substream, path)` triple owns a ChaCha12 keystream; the normal
//! for `(step, component)` is read at a fixed word offset, so a path's draws do
//! not depend on which worker produced them or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Independent families of streams built from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Brownian = 0,
    CouplingNoise = 1,
    Sampling = 2,
}

const WORDS_PER_NORMAL: u128 = 4;

pub struct NormalStream {
    rng: ChaCha12Rng,
}

impl NormalStream {
    pub fn new(seed: u64, substream: Substream, path: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(((substream as u64) << 48) | (path & ((1 << 48) - 1)));
        Self { rng }
    }

    /// Jumps to the normal with flat index `index` within this stream.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * WORDS_PER_NORMAL);
    }

    /// Box-Muller with exactly two 64-bit words per draw.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
