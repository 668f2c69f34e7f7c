// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded random streams. Every stochastic step takes an explicit generator
//! derived from a user seed and a purpose tag; there is no global state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Derives an independent stream from a base seed and a purpose tag.
pub fn stream(seed: u64, tag: u64) -> StreamRng {
    // splitmix64 finalizer over (seed, tag) so nearby seeds diverge
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Purpose tags for [`stream`].
pub mod tags {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const WORLDS: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const SPLIT: u64 = 6;
}

/// Uniform integer in `0..=upper` using only integer arithmetic
/// (rejection sampling on 64-bit draws), stable across platforms.
pub fn below_inclusive(rng: &mut StreamRng, upper: u64) -> u64 {
    if upper == u64::MAX {
        return rng.next_u64();
    }
    let range = upper + 1;
    let zone = u64::MAX - (u64::MAX % range) - 1;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % range;
        }
    }
}

/// Fisher-Yates shuffle driven by [`below_inclusive`].
pub fn shuffle<T>(rng: &mut StreamRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below_inclusive(rng, i as u64) as usize;
        items.swap(i, j);
    }
}

/// Uniform float in `[0, 1)`.
pub fn unit(rng: &mut StreamRng) -> f64 {
    rng.random::<f64>()
}

/// Uniform float in `[lo, hi)`.
pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut StreamRng) -> f64 {
    let u1 = 1.0 - unit(rng);
    let u2 = unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
