//! Seeded random drive envelopes.
//!
//! Pulses are drawn from SplitMix64 (Steele, Lea and Flood 2014) seeded
//! with the raw 64-bit seed: the state advances by `0x9e3779b97f4a7c15`
//! and each output is the standard three-round mix. A uniform variate in
//! `[0, 1)` is `(x >> 11) * 2^-53`. Each pulse consumes four outputs in
//! the order `c1, c2, w1, w2`, so the sequence can be reproduced in any
//! language from this description alone.

use std::f64::consts::PI;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use tdmps_core::PulseSpec;

/// Upper bound of the amplitudes `c1`, `c2`.
pub const AMPLITUDE_MAX: f64 = 5.0;
/// Upper bound of the angular frequencies `w1`, `w2`, rad/µs.
pub const FREQUENCY_MAX: f64 = 10.0 * PI;

fn unit(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `n_pulses` envelopes `c1 sin(w1 t) + c2 cos(w2 t)` for `seed`.
pub fn generate_pulses(seed: u64, n_pulses: usize) -> Vec<PulseSpec> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..n_pulses)
        .map(|_| {
            let c1 = AMPLITUDE_MAX * unit(&mut rng);
            let c2 = AMPLITUDE_MAX * unit(&mut rng);
            let w1 = FREQUENCY_MAX * unit(&mut rng);
            let w2 = FREQUENCY_MAX * unit(&mut rng);
            PulseSpec { c1, c2, w1, w2 }
        })
        .collect()
}
