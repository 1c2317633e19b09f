//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from a master seed, a purpose tag and a list of indices, e.g.
//! `(seed, "noise", [step, particle])`. Streams with different keys are
//! statistically independent and no stream state is ever shared, so results
//! do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Scalar;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a 64-bit sub-seed from `(seed, tag, indices)`.
pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = mix(seed.wrapping_add(GOLDEN));
    h = mix(h ^ tag_hash(tag));
    for (pos, &idx) in indices.iter().enumerate() {
        // the position keeps (a, b) and (b, a) apart
        h = mix(h.wrapping_add(GOLDEN.wrapping_mul(pos as u64 + 1)) ^ idx);
    }
    h
}

/// Opens the stream keyed by `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, indices))
}

/// One standard normal draw converted to `T`.
#[inline]
pub fn std_normal<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::lit(v)
}
