//! Deterministic, cross-platform Gaussian sampling.
//!
//! Every stochastic experiment in this crate draws noise from
//! [`GaussianStream`], a fixed generator pipeline named
//! `chacha12-boxmuller-v1`:
//!
//! 1. the 64-bit seed keys a ChaCha12 stream cipher
//!    (`ChaCha12Rng::seed_from_u64`);
//! 2. each uniform is the top 53 bits of one `u64` output, mapped to
//!    `(0, 1]` as `(x >> 11).wrapping_add(1) as f64 * 2^-53`;
//! 3. consecutive uniform pairs `(u1, u2)` are converted to a pair of
//!    standard normals by the Box-Muller transform
//!    `sqrt(-2 ln u1) * (cos, sin)(2 pi u2)`, consumed cosine first.
//!
//! Two runs with the same seed produce bit-identical streams on every
//! platform, so all simulated data in reports is reproducible from the
//! recorded seed alone.
//!
//! Monte-Carlo harnesses derive per-trial seeds from a master seed with
//! [`trial_seed`], a single SplitMix64 step of
//! `master + (index + 1) * 0x9E3779B97F4A7C15`; trials are therefore
//! independent of both execution order and thread count.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Seeded stream of i.i.d. standard normal variates.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: ChaCha12Rng,
    cached: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha12Rng::seed_from_u64(seed), cached: None }
    }

    /// Uniform on (0, 1], 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        let x = self.rng.next_u64() >> 11;
        (x.wrapping_add(1)) as f64 * (1.0 / 9007199254740992.0)
    }

    /// One standard normal variate.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TWO_PI * u2;
        self.cached = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform sign in {-1, +1}, one cipher output per sign.
    pub fn next_sign(&mut self) -> f64 {
        if self.rng.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-trial seed derived from a master seed; documented splitting rule
/// shared by every Monte-Carlo harness in this crate.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Name recorded in simulation metadata so external tooling can
/// reproduce the stream.
pub const GENERATOR_NAME: &str = "chacha12-boxmuller-v1";
