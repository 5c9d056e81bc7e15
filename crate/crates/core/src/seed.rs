//! Derivation of independent per-replicate seeds from one master seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `replicate` of experiment case `case`.
///
/// `mix(mix(mix(master) ^ case) ^ replicate)`: a pure function of its
/// inputs, so replicates can run in any order or in parallel.
pub fn replicate_seed(master: u64, case: u64, replicate: u64) -> u64 {
    mix(mix(mix(master) ^ case) ^ replicate)
}
