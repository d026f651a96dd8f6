//! Decibel helpers and physical constants.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    linear_to_db(watt * 1e3)
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (phase + PI).rem_euclid(TAU) - PI
}
