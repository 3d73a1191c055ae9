//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed and builds its own ChaCha8
//! stream from it, so results do not depend on call order. Sub-seeds for
//! independent stages of one experiment are derived from a master seed and a
//! stream name.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of the named stream from `master`.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    // FNV-1a over the name, folded into a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_differ_and_repeat() {
        assert_eq!(derive_seed(7, "grid"), derive_seed(7, "grid"));
        assert_ne!(derive_seed(7, "grid"), derive_seed(7, "data"));
        assert_ne!(derive_seed(7, "grid"), derive_seed(8, "grid"));
        let a: f64 = rng(3).random();
        let b: f64 = rng(3).random();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
