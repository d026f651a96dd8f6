//! Signal-processing core for coherent synthetic aperture communication (SAC)
//! on a LEO satellite uplink.
//!
//! A ground UE repeats one OFDM symbol `M` times while the satellite flies
//! over it. The receiver removes the quadratic phase history of a reference
//! target at nadir (azimuth compression), turns the residual constant Doppler
//! into an angle estimate, and coherently combines the `M` copies toward each
//! UE before ordinary OFDM equalization and polar decoding.
//!
//! Module map:
//!
//! * [`geometry`]: satellite/UE geometry, Doppler truths, resolution and
//!   parameter planning.
//! * [`ofdm`]: QPSK mapping, pilot comb, frame construction, unitary DFTs and
//!   soft demapping.
//! * [`fec`]: CRC-aided polar code with successive-cancellation list decoding.
//! * [`channel`]: link budget, moving-satellite LoS channel, superposition and
//!   AWGN.
//! * [`receiver`]: azimuth compression, Doppler profile, UE detection,
//!   beamsteering, Doppler correction, channel estimation and ZF.

pub mod channel;
pub mod error;
pub mod fec;
pub mod geometry;
pub mod ofdm;
pub mod receiver;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
