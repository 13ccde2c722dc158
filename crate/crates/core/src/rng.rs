//! Seed derivation and shared random primitives.
//!
//! Every stochastic routine in the crate takes an explicit `u64` seed and
//! generates samples in fixed-size chunks whose sub-seeds are derived with
//! [`derive_seed`]. Parallel and serial execution therefore produce
//! bit-identical streams, and parallel callers can partition seed space
//! without coordination.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of samples drawn from one derived sub-seed.
pub const CHUNK: usize = 1024;

/// SplitMix64 finalizer; decorrelates consecutive chunk indices.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the sub-seed for `chunk` of a stream rooted at `seed`.
pub fn derive_seed(seed: u64, chunk: u64) -> u64 {
    splitmix64(seed ^ splitmix64(chunk.wrapping_add(1)))
}

/// RNG for one chunk of a seeded stream.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk))
}

/// Standard normal draw via Box-Muller (two uniforms per call).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
