//! Per-trial seed derivation.
//!
//! Seeds depend only on `(base, point, trial, stream)`, never on execution
//! order, so any worker count draws the same random numbers.

/// Stream id of the receiver noise; UE streams use their id.
pub const NOISE_STREAM: u64 = u64::MAX;
/// Stream id of the representative profile snapshot.
pub const PROFILE_STREAM: u64 = u64::MAX - 1;
/// Pilot streams are `PILOT_STREAM + ue_id`.
pub const PILOT_STREAM: u64 = 1 << 32;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, point: u64, trial: u64, stream: u64) -> u64 {
    [point, trial, stream].iter().fold(splitmix64(base), |acc, &v| splitmix64(acc ^ splitmix64(v)))
}
