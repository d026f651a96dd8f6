//! Flat-Earth satellite/UE geometry for one synthetic aperture.
//!
//! The satellite flies along `x` at height `R0` from `-L/2` to `L/2` while the
//! UE repeats `M` OFDM symbols of duration `T`, so `L = v M T`. The UE sits on
//! the ground at `x_UE`. Angles are radians throughout; degrees only appear at
//! I/O boundaries.

use std::f64::consts::TAU;

use crate::units::{linear_to_db, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Largest `|x_UE| / R0` accepted by the small-angle Doppler model.
pub const SMALL_ANGLE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitGeometry {
    /// Orbit height `R0` (m).
    pub height_m: f64,
    /// Orbital velocity `v` (m/s).
    pub velocity_mps: f64,
}

impl OrbitGeometry {
    pub fn new(height_m: f64, velocity_mps: f64) -> Result<Self> {
        if !(height_m > 0.0 && height_m.is_finite()) {
            return Err(Error::InvalidConfig(format!("orbit height must be > 0, got {height_m}")));
        }
        if !(velocity_mps > 0.0 && velocity_mps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "orbital velocity must be > 0, got {velocity_mps}"
            )));
        }
        Ok(Self { height_m, velocity_mps })
    }

    /// 600 km LEO at 7.82 km/s.
    pub fn leo_600km() -> Self {
        Self { height_m: 600e3, velocity_mps: 7820.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig {
    pub frequency_hz: f64,
    pub wavelength_m: f64,
}

impl CarrierConfig {
    pub fn new(frequency_hz: f64) -> Result<Self> {
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be > 0, got {frequency_hz}"
            )));
        }
        Ok(Self { frequency_hz, wavelength_m: SPEED_OF_LIGHT / frequency_hz })
    }
}

/// The `M` acquisitions forming one synthetic aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionWindow {
    /// Number of repeated OFDM symbols `M`.
    pub symbols: usize,
    /// Symbol duration including CP, `T` (s).
    pub symbol_duration_s: f64,
    /// Aperture length `L = v M T` (m).
    pub aperture_m: f64,
    /// Virtual element spacing `d = v T` (m).
    pub spacing_m: f64,
    /// `M T` (s).
    pub frame_duration_s: f64,
}

impl AcquisitionWindow {
    pub fn new(orbit: &OrbitGeometry, symbols: usize, symbol_duration_s: f64) -> Result<Self> {
        if symbols == 0 {
            return Err(Error::InvalidConfig("aperture needs at least one symbol".into()));
        }
        if !(symbol_duration_s > 0.0 && symbol_duration_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "symbol duration must be > 0, got {symbol_duration_s}"
            )));
        }
        let frame_duration_s = symbols as f64 * symbol_duration_s;
        Ok(Self {
            symbols,
            symbol_duration_s,
            aperture_m: orbit.velocity_mps * frame_duration_s,
            spacing_m: orbit.velocity_mps * symbol_duration_s,
            frame_duration_s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePosition {
    /// Ground cross-range coordinate `x_UE` (m).
    pub cross_range_m: f64,
    /// Slant range from the aperture centre, `sqrt(x_UE^2 + R0^2)` (m).
    pub slant_range_m: f64,
    /// Azimuth seen from the aperture centre (rad).
    pub azimuth_rad: f64,
}

impl UePosition {
    pub fn new(cross_range_m: f64, orbit: &OrbitGeometry) -> Self {
        let slant_range_m = cross_range_m.hypot(orbit.height_m);
        Self {
            cross_range_m,
            slant_range_m,
            azimuth_rad: (cross_range_m / slant_range_m).asin(),
        }
    }

    /// One-way propagation delay `R_UE / c0` (s).
    pub fn delay_s(&self) -> f64 {
        self.slant_range_m / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseModel {
    /// `2 pi R(t) / lambda` with the exact square root.
    Exact,
    /// Quadratic (Fresnel) expansion of the range around `R0`.
    #[default]
    Fresnel,
}

/// Angular and cross-range resolution of one aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    /// Doppler bin width `1 / (M T)` (Hz).
    pub doppler_resolution_hz: f64,
    /// `lambda / L` (rad).
    pub azimuth_resolution_rad: f64,
    /// `lambda / (2 v T)` (rad); the unambiguous range is `+-` this value.
    pub max_unambiguous_azimuth_rad: f64,
    pub cross_range_resolution_m: f64,
    pub max_unambiguous_cross_range_m: f64,
}

/// Everything needed to evaluate phase histories over one aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacGeometry {
    pub orbit: OrbitGeometry,
    pub carrier: CarrierConfig,
    pub window: AcquisitionWindow,
}

impl SacGeometry {
    pub fn new(orbit: OrbitGeometry, carrier: CarrierConfig, window: AcquisitionWindow) -> Self {
        Self { orbit, carrier, window }
    }

    pub fn ue(&self, cross_range_m: f64) -> UePosition {
        UePosition::new(cross_range_m, &self.orbit)
    }

    /// Satellite abscissa `x(t) = -L/2 + v t`.
    pub fn satellite_x(&self, t: f64) -> f64 {
        -0.5 * self.window.aperture_m + self.orbit.velocity_mps * t
    }

    /// Exact slant range at time `t` (m).
    pub fn range_at(&self, t: f64, ue: &UePosition) -> f64 {
        (self.satellite_x(t) - ue.cross_range_m).hypot(self.orbit.height_m)
    }

    /// Excess of the range over `R0` under the chosen model (m).
    ///
    /// Both branches avoid subtracting two ~600 km numbers.
    fn excess_range(&self, t: f64, ue: &UePosition, model: PhaseModel) -> f64 {
        let d = self.satellite_x(t) - ue.cross_range_m;
        let r0 = self.orbit.height_m;
        match model {
            PhaseModel::Fresnel => d * d / (2.0 * r0),
            PhaseModel::Exact => d * d / (d.hypot(r0) + r0),
        }
    }

    /// Unwrapped carrier phase at time `t` (rad).
    pub fn carrier_phase(&self, t: f64, ue: &UePosition, model: PhaseModel) -> f64 {
        TAU * (self.orbit.height_m + self.excess_range(t, ue, model)) / self.carrier.wavelength_m
    }

    /// Carrier phase reduced to `[-pi, pi)`, computed without the precision
    /// loss of reducing the ~10^7 rad raw value.
    pub fn carrier_phase_wrapped(&self, t: f64, ue: &UePosition, model: PhaseModel) -> f64 {
        let lambda = self.carrier.wavelength_m;
        let bulk = (self.orbit.height_m / lambda).fract();
        let excess = self.excess_range(t, ue, model) / lambda;
        crate::units::wrap_phase(TAU * (bulk + excess.fract()))
    }

    /// Instantaneous Doppler of the Fresnel phase history, `(1/2pi) dphi/dt` (Hz).
    pub fn doppler_true(&self, t: f64, ue: &UePosition) -> f64 {
        let v = self.orbit.velocity_mps;
        (self.satellite_x(t) - ue.cross_range_m) * v
            / (self.orbit.height_m * self.carrier.wavelength_m)
    }

    /// Chirp rate of [`Self::doppler_true`], `v^2 / (R0 lambda)` (Hz/s).
    pub fn doppler_rate(&self) -> f64 {
        let v = self.orbit.velocity_mps;
        v * v / (self.orbit.height_m * self.carrier.wavelength_m)
    }

    /// Constant Doppler left after compressing against a nadir reference,
    /// `-v x_UE / (R0 lambda)` (Hz).
    pub fn doppler_after_compression(&self, ue: &UePosition) -> Result<f64> {
        self.check_small_angle(ue.cross_range_m)?;
        Ok(-self.orbit.velocity_mps * ue.cross_range_m
            / (self.orbit.height_m * self.carrier.wavelength_m))
    }

    pub fn check_small_angle(&self, cross_range_m: f64) -> Result<()> {
        let limit_m = SMALL_ANGLE_LIMIT * self.orbit.height_m;
        if cross_range_m.abs() >= limit_m || !cross_range_m.is_finite() {
            return Err(Error::OutsideApproximation { x_m: cross_range_m, limit_m });
        }
        Ok(())
    }

    /// Small-angle azimuth for a compressed Doppler, `-f lambda / v` (rad).
    pub fn azimuth_from_doppler(&self, doppler_hz: f64) -> f64 {
        -doppler_hz * self.carrier.wavelength_m / self.orbit.velocity_mps
    }

    /// Inverse of [`Self::azimuth_from_doppler`].
    pub fn doppler_from_azimuth(&self, azimuth_rad: f64) -> f64 {
        -azimuth_rad * self.orbit.velocity_mps / self.carrier.wavelength_m
    }

    /// Fractional Doppler bin `M T f` of a compressed Doppler.
    pub fn doppler_bin(&self, doppler_hz: f64) -> f64 {
        doppler_hz * self.window.frame_duration_s
    }

    pub fn resolution(&self) -> Resolution {
        resolution_and_ambiguity(&self.window, &self.carrier, &self.orbit)
    }
}

pub fn resolution_and_ambiguity(
    window: &AcquisitionWindow,
    carrier: &CarrierConfig,
    orbit: &OrbitGeometry,
) -> Resolution {
    let lambda = carrier.wavelength_m;
    let azimuth_resolution_rad = lambda / window.aperture_m;
    let max_unambiguous_azimuth_rad = lambda / (2.0 * window.spacing_m);
    Resolution {
        doppler_resolution_hz: 1.0 / window.frame_duration_s,
        azimuth_resolution_rad,
        max_unambiguous_azimuth_rad,
        cross_range_resolution_m: orbit.height_m * azimuth_resolution_rad,
        max_unambiguous_cross_range_m: orbit.height_m * max_unambiguous_azimuth_rad,
    }
}

/// A 5G NR FR1 numerology occupying a given bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerology {
    pub mu: u8,
    pub bandwidth_hz: f64,
}

impl Numerology {
    pub fn new(mu: u8, bandwidth_hz: f64) -> Result<Self> {
        if mu > 2 {
            return Err(Error::InvalidConfig(format!("FR1 numerology mu must be 0..=2, got {mu}")));
        }
        let n = Self { mu, bandwidth_hz };
        let ratio = bandwidth_hz / n.subcarrier_spacing_hz();
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "bandwidth {bandwidth_hz} Hz is not a whole number of {} Hz subcarriers",
                n.subcarrier_spacing_hz()
            )));
        }
        Ok(n)
    }

    /// The narrow-band configurations used for the sub-kilometre planning table.
    pub fn reference(mu: u8) -> Result<Self> {
        let bandwidth_hz = match mu {
            0 => 4.5e6,
            1 => 3.96e6,
            2 => 7.92e6,
            _ => return Err(Error::InvalidConfig(format!("no reference bandwidth for mu = {mu}"))),
        };
        Self::new(mu, bandwidth_hz)
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        15e3 * f64::from(1u32 << self.mu)
    }

    pub fn subcarriers(&self) -> usize {
        (self.bandwidth_hz / self.subcarrier_spacing_hz()).round() as usize
    }

    /// Mean normal-CP symbol duration: 14 symbols per slot and `2^mu` slots
    /// per millisecond, with the longer first-symbol CP of every half
    /// subframe averaged in.
    pub fn mean_symbol_duration_s(&self) -> f64 {
        1e-3 / (14.0 * f64::from(1u32 << self.mu))
    }
}

/// What one frame carries once pilots and coding are accounted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadModel {
    pub pilot_fraction: f64,
    pub bits_per_symbol: f64,
    pub code_rate: f64,
}

impl Default for PayloadModel {
    fn default() -> Self {
        Self { pilot_fraction: 0.25, bits_per_symbol: 2.0, code_rate: 2.0 / 3.0 }
    }
}

impl PayloadModel {
    pub fn info_bits_per_symbol(&self, subcarriers: usize) -> f64 {
        (1.0 - self.pilot_fraction) * subcarriers as f64 * self.bits_per_symbol * self.code_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    /// Aperture needed for the requested cross-range resolution (m).
    pub required_aperture_m: f64,
    /// Smallest number of repeated symbols reaching it.
    pub min_symbols: usize,
    /// `10 log10(M)` (dB).
    pub processing_gain_db: f64,
    /// Aperture actually obtained with `min_symbols` (m).
    pub aperture_m: f64,
    pub symbol_duration_s: f64,
    /// Net information rate after the `M`-fold repetition (bit/s).
    pub net_bit_rate_bps: f64,
}

/// Sizes an aperture for a target cross-range resolution.
pub fn plan_parameters(
    target_cross_range_m: f64,
    numerology: &Numerology,
    orbit: &OrbitGeometry,
    carrier: &CarrierConfig,
    payload: &PayloadModel,
) -> Result<Plan> {
    if !(target_cross_range_m > 0.0 && target_cross_range_m.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "target resolution must be > 0, got {target_cross_range_m}"
        )));
    }
    let required_aperture_m = carrier.wavelength_m * orbit.height_m / target_cross_range_m;
    if required_aperture_m >= SMALL_ANGLE_LIMIT * orbit.height_m {
        return Err(Error::InvalidConfig(format!(
            "a {target_cross_range_m} m resolution needs a {required_aperture_m:.1} m aperture, \
             which is not small against the orbit height"
        )));
    }
    let symbol_duration_s = numerology.mean_symbol_duration_s();
    let spacing = orbit.velocity_mps * symbol_duration_s;
    let min_symbols = (required_aperture_m / spacing).ceil().max(1.0) as usize;
    let frame_s = min_symbols as f64 * symbol_duration_s;
    Ok(Plan {
        required_aperture_m,
        min_symbols,
        processing_gain_db: linear_to_db(min_symbols as f64),
        aperture_m: spacing * min_symbols as f64,
        symbol_duration_s,
        net_bit_rate_bps: payload.info_bits_per_symbol(numerology.subcarriers()) / frame_s,
    })
}
