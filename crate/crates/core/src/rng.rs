//! Seeded random streams.
//!
//! Triplet streams are driven by ChaCha20 (the `rand_chacha` word stream)
//! seeded from a single `u64`, and bounded integers are drawn with Lemire's
//! multiply-and-reject method on raw 64-bit outputs. Both pieces are fixed
//! here rather than delegated to `rand::Rng::gen_range`, whose algorithm is
//! allowed to change between releases.
//!
//! Per-cell seeds are derived from a master seed with the SplitMix64
//! finalizer, see [`derive_seed`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in output metadata next to every seed.
pub const ALGORITHM_ID: &str = "chacha20-seed_from_u64+lemire64";

/// Identifier of the seed mixing function used by [`derive_seed`].
pub const SEED_MIXER_ID: &str = "splitmix64-fold";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; used to turn language codes into seed material.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Folds `parts` into `master`: `h <- splitmix64(h ^ part)` for each part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ p))
}

pub struct StreamRng {
    inner: ChaCha20Rng,
}

impl std::fmt::Debug for StreamRng {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("StreamRng")
    }
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng {
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(bound);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn below_usize(&mut self, bound: usize) -> usize {
        self.below(bound as u64) as usize
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn inner_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.inner
    }
}
