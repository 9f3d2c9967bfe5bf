//! Counter-based random streams and the variate generators used by the
//! simulation cases.
//!
//! Every stream is a ChaCha8 keystream keyed by the run seed and positioned
//! on its own 64-bit stream id `(rep << 8) | substream`, so streams for
//! distinct `(rep, substream)` pairs never overlap and do not depend on the
//! order in which replications execute.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::function::erf::erfc_inv;

/// Replication index reserved for configuration-level draws.
pub const CONFIG_REP: u64 = (1 << 56) - 1;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, rep: u64, substream: u8) -> Stream {
    debug_assert!(rep <= CONFIG_REP);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 8) | substream as u64);
    rng
}

/// Uniform on the open interval `(0, 1)` with 53 random bits.
pub fn open_unit(rng: &mut Stream) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform(rng: &mut Stream, low: f64, high: f64) -> f64 {
    rng.gen_range(low..high)
}

/// Standard normal by inversion.
pub fn sample_standard_normal(rng: &mut Stream) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * open_unit(rng))
}

/// Student t with `df` degrees of freedom divided by `scale`.
pub fn sample_student_t(rng: &mut Stream, df: f64, scale: f64) -> f64 {
    let z = sample_standard_normal(rng);
    let chi2 = ChiSquared::new(df).expect("positive degrees of freedom");
    z / (chi2.sample(rng) / df).sqrt() / scale
}
