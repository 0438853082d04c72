//! Counter-based hashing for noise that must be a pure function of time.

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a seed, a stream id and a counter into one 64-bit key.
pub(crate) fn mix(seed: u64, stream: u64, counter: i64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ counter as u64)
}

/// Uniform value in `[0, 1)`.
pub(crate) fn unit(seed: u64, stream: u64, counter: i64) -> f64 {
    (mix(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
