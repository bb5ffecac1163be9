//! Pinned pseudo-random stream for reproducible experiments.
//!
//! Seeded targets must be bit-identical across platforms and across releases
//! of this crate. A third-party generator could change its stream in a minor
//! version, so the generator is pinned here in full: SplitMix64
//! (Steele, Lea & Flood, “Fast splittable pseudorandom number generators”,
//! OOPSLA 2014) — 64 bits of state advanced by a Weyl increment, output mixed
//! by xor-shift-multiply. The stream below never changes.

use crate::fourier::TrigPotential;
use crate::{fl, Scalar};

/// SplitMix64 generator. The seed is taken verbatim as the initial state.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) using the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [−1, 1).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

/// Potential of degree `p` with coefficients i.i.d. uniform on [−1, 1).
///
/// Draw order is c_0, c_1, …, c_p, then d_1, …, d_p. Draws happen in `f64`
/// and are converted to `T` afterwards, so every scalar type and platform
/// sees the same stream for a given seed.
pub fn seeded_potential<T: Scalar>(p: usize, seed: u64) -> TrigPotential<T> {
    let mut rng = SplitMix64::new(seed);
    let c: Vec<T> = (0..=p).map(|_| fl(rng.next_symmetric())).collect();
    let d: Vec<T> = (0..p).map(|_| fl(rng.next_symmetric())).collect();
    TrigPotential::new(c, d).expect("uniform draws are finite")
}
