//! Seed derivation for per-retraining model initialization.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines the run's base seed with a stream id (0 for the probation
/// pipeline, otherwise the detector id) and a time index.
pub fn derive_seed(base: u64, stream: u64, t: u64) -> u64 {
    mix(mix(mix(base) ^ stream.wrapping_mul(GOLDEN)) ^ t)
}
