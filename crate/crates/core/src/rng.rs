//! Counter-based deterministic random numbers.
//!
//! Each draw is a pure function of (seed, index, coordinate), so any trial
//! can be regenerated in isolation and parallel execution cannot change
//! the stream.

/// SplitMix64 step: advances the state by the golden-gamma increment and
/// returns the mixed output.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes the (seed, index, coordinate) triple to a uniform u64.
pub fn counter_u64(seed: u64, index: u64, coordinate: u64) -> u64 {
    let mut z = splitmix64(seed);
    z = splitmix64(z ^ index);
    splitmix64(z ^ coordinate)
}

/// Uniform draw in [0, 1) from the top 53 bits.
pub fn unit_f64(seed: u64, index: u64, coordinate: u64) -> f64 {
    (counter_u64(seed, index, coordinate) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
