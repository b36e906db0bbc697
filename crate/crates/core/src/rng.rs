//! Seed derivation and per-component random streams.
//!
//! Every episode owns one 64-bit seed. Each simulation component draws from
//! its own ChaCha stream derived from that seed, so two episodes that share a
//! seed but differ in learner or memory size still see the same deployment,
//! phases and private signals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of indices into a seed, one SplitMix64 round per word.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &w| mix64(acc ^ mix64(w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Phases = 2,
    Signals = 3,
    Learning = 4,
    Codes = 5,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, &[which as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_stable_and_path_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = stream(3, Stream::Topology).random();
        let b: u64 = stream(3, Stream::Codes).random();
        let c: u64 = stream(3, Stream::Topology).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
