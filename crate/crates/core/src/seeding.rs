//! Seed derivation.
//!
//! Scheme, from one master seed:
//!
//! * replication `r` of a Monte Carlo run uses ensemble seed
//!   `split(master, r)`, a SplitMix64 finalizer applied twice;
//! * inside an ensemble, process `i` reads ChaCha8 stream `i` keyed by the
//!   ensemble seed, and step `t` starts at word offset `t * 2^16` of that
//!   stream (step 0 is the drift draw).
//!
//! Every random number is therefore a pure function of
//! `(master, r, i, t)`, independent of thread count and iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP_WORDS: u32 = 16;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `index` of `master`.
pub fn split(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index))
}

pub(crate) struct CellRng {
    rng: ChaCha8Rng,
}

impl CellRng {
    pub(crate) fn new(seed: u64, process: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(process);
        Self { rng }
    }

    pub(crate) fn at(&mut self, step: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos(u128::from(step) << STEP_WORDS);
        &mut self.rng
    }
}

/// FNV-1a over 64-bit words; used to fingerprint sampled ensembles.
#[derive(Debug, Clone, Copy)]
pub struct Digest(u64);

impl Default for Digest {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Digest {
    pub fn push(&mut self, word: u64) {
        for byte in word.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn push_f64s(&mut self, values: &[f64]) {
        for v in values {
            self.push((v + 0.0).to_bits());
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn cells_are_order_independent() {
        let mut a = CellRng::new(5, 2);
        let x3: u64 = a.at(3).random();
        let x1: u64 = a.at(1).random();
        let mut b = CellRng::new(5, 2);
        assert_eq!(b.at(1).random::<u64>(), x1);
        assert_eq!(b.at(3).random::<u64>(), x3);
        let mut c = CellRng::new(5, 3);
        assert_ne!(c.at(1).random::<u64>(), x1);
    }

    #[test]
    fn split_separates_children() {
        assert_ne!(split(1, 0), split(1, 1));
        assert_ne!(split(1, 0), split(2, 0));
        assert_eq!(split(9, 4), split(9, 4));
    }
}
