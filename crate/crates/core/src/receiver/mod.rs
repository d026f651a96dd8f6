//! Coherent synthetic aperture receiver.
//!
//! Pipeline for one frame: strip the CP, compress against the nadir phase
//! history, build the Doppler profile across symbols and pick the UEs, then
//! per UE steer the aperture, remove the intra-symbol Doppler, demodulate,
//! equalize and produce LLRs.

mod equalize;
mod profile;

pub use equalize::{doppler_correct, estimate_channel, zf_equalize, EqualizedSymbols, UNRELIABLE_PILOT_RATIO};
pub use profile::{AzimuthProfile, UeDetection};

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{PhaseModel, SacGeometry, UePosition};
use crate::ofdm::{llr_demap_weighted, Domain, FrameGrid, OfdmConfig, OfdmModem, PilotLayout};
use crate::units::SPEED_OF_LIGHT;
use crate::{Error, Result};

/// Zero-padding factor of the interpolated Doppler estimator.
pub const PROFILE_OVERSAMPLE: usize = 8;

/// Upper bound on re-estimation sweeps per added tone.
const JOINT_ITERATIONS: usize = 20;

/// Per-row least-squares amplitude of a tone at fractional bin `bin`,
/// `a_n = (1/M) sum_m r[n, m] exp(-j 2 pi bin m / M)`.
fn tone_amplitudes(grid: &FrameGrid, bin: f64) -> Vec<Complex64> {
    let m = grid.cols();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.rows()];
    for (j, col) in grid.columns().enumerate() {
        let w = Complex64::from_polar(1.0 / m as f64, -TAU * bin * j as f64 / m as f64);
        acc.iter_mut().zip(col).for_each(|(a, z)| *a += z * w);
    }
    acc
}

/// Column norm of the symbol-axis DTFT at fractional bin `bin`.
fn dtft_norm(grid: &FrameGrid, bin: f64) -> f64 {
    let m = grid.cols() as f64;
    tone_amplitudes(grid, bin).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt() * m.sqrt()
}

/// Golden-section maximum of [`dtft_norm`] within half a bin of `start`.
fn local_peak(grid: &FrameGrid, start: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (start - 0.5, start + 0.5);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (dtft_norm(grid, x1), dtft_norm(grid, x2));
    while hi - lo > 1e-5 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = dtft_norm(grid, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = dtft_norm(grid, x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, dtft_norm(grid, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimation {
    /// Argmax over the `M` native Doppler bins.
    Grid,
    /// Zero-padded profile plus parabolic peak interpolation.
    #[default]
    Interpolated,
}

impl Estimation {
    pub fn oversample(self) -> usize {
        match self {
            Self::Grid => 1,
            Self::Interpolated => PROFILE_OVERSAMPLE,
        }
    }
}

/// Unit-norm receive weights `b_m = exp(j (2 pi / lambda) m v T theta) / sqrt(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub theta_rad: f64,
    weights: Vec<Complex64>,
}

impl SteeringVector {
    pub fn new(theta_rad: f64, geometry: &SacGeometry) -> Self {
        let w = &geometry.window;
        let m = w.symbols;
        let step = TAU / geometry.carrier.wavelength_m * w.spacing_m * theta_rad;
        let scale = 1.0 / (m as f64).sqrt();
        Self { theta_rad, weights: (0..m).map(|i| Complex64::from_polar(scale, step * i as f64)).collect() }
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// How the ZF stage learns the channel.
#[derive(Debug, Clone, Copy)]
pub enum Csi<'a> {
    /// Estimate from the pilot comb.
    Pilot,
    /// Known frequency response `H_k` after combining and Doppler correction.
    Ideal(&'a [Complex64]),
}

/// Result of the per-UE receive chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedUe {
    pub detection: UeDetection,
    /// Data-subcarrier LLRs, two per QPSK symbol.
    pub llrs: Vec<f64>,
    pub equalized: EqualizedSymbols,
}

/// Receiver bound to one aperture and numerology.
#[derive(Clone)]
pub struct SacReceiver {
    geometry: SacGeometry,
    ofdm: OfdmConfig,
    estimation: Estimation,
    modem: OfdmModem,
    /// `exp(-j phi_az)` for the CP-free samples, column-major `N x M`.
    reference: Vec<Complex64>,
    profile_fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SacReceiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SacReceiver")
            .field("ofdm", &self.ofdm)
            .field("estimation", &self.estimation)
            .finish_non_exhaustive()
    }
}

impl SacReceiver {
    pub fn new(geometry: SacGeometry, ofdm: OfdmConfig, estimation: Estimation) -> Result<Self> {
        let t = ofdm.symbol_duration_s();
        if geometry.window.symbols != ofdm.symbols || (geometry.window.symbol_duration_s - t).abs() > 1e-12 * t {
            return Err(Error::InvalidConfig("acquisition window does not match the OFDM numerology".into()));
        }
        let nadir = geometry.ue(0.0);
        let (n, sps, cp) = (ofdm.subcarriers, ofdm.samples_per_symbol(), ofdm.cp_len);
        let ts = 1.0 / ofdm.bandwidth_hz();
        let mut reference = Vec::with_capacity(n * ofdm.symbols);
        for m in 0..ofdm.symbols {
            for i in 0..n {
                let t = (m * sps + cp + i) as f64 * ts;
                let phi = geometry.carrier_phase_wrapped(t, &nadir, PhaseModel::Fresnel);
                reference.push(Complex64::from_polar(1.0, -phi));
            }
        }
        let profile_fft = FftPlanner::new().plan_fft_forward(ofdm.symbols * estimation.oversample());
        Ok(Self { geometry, ofdm, estimation, modem: OfdmModem::new(ofdm), reference, profile_fft })
    }

    pub fn geometry(&self) -> &SacGeometry {
        &self.geometry
    }

    pub fn ofdm(&self) -> &OfdmConfig {
        &self.ofdm
    }

    pub fn estimation(&self) -> Estimation {
        self.estimation
    }

    pub fn strip_cp(&self, stream: &[Complex64]) -> Result<FrameGrid> {
        let grid = self.modem.strip_cp(stream)?;
        self.check_grid(&grid)?;
        Ok(grid)
    }

    fn check_grid(&self, grid: &FrameGrid) -> Result<()> {
        if grid.rows() != self.ofdm.subcarriers || grid.cols() != self.ofdm.symbols || grid.domain() != Domain::Time {
            return Err(Error::LengthMismatch {
                what: "time-domain frame grid",
                expected: self.ofdm.subcarriers * self.ofdm.symbols,
                actual: grid.rows() * grid.cols(),
            });
        }
        Ok(())
    }

    /// Removes the phase history of a reference UE at nadir.
    pub fn azimuth_compress(&self, grid: &FrameGrid) -> Result<FrameGrid> {
        self.check_grid(grid)?;
        let data = grid.as_slice().iter().zip(&self.reference).map(|(r, h)| r * h).collect();
        FrameGrid::from_columns(grid.rows(), grid.cols(), Domain::Time, data)
    }

    /// Profile at the estimator's own oversampling factor.
    pub fn doppler_profile(&self, compressed: &FrameGrid) -> Result<AzimuthProfile> {
        self.profile_with(compressed, self.estimation.oversample(), self.profile_fft.as_ref())
    }

    /// Profile from a `P M`-point zero-padded transform.
    pub fn doppler_profile_oversampled(&self, compressed: &FrameGrid, oversample: usize) -> Result<AzimuthProfile> {
        if oversample == 0 {
            return Err(Error::InvalidConfig("oversampling factor must be >= 1".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(self.ofdm.symbols * oversample);
        self.profile_with(compressed, oversample, fft.as_ref())
    }

    fn profile_with(&self, compressed: &FrameGrid, oversample: usize, fft: &dyn Fft<f64>) -> Result<AzimuthProfile> {
        self.check_grid(compressed)?;
        let (n, m) = (compressed.rows(), compressed.cols());
        let len = m * oversample;
        // One zero-padded row per CP-free sample index.
        let mut rows = vec![Complex64::new(0.0, 0.0); n * len];
        for (j, col) in compressed.columns().enumerate() {
            for (i, &z) in col.iter().enumerate() {
                rows[i * len + j] = z;
            }
        }
        fft.process(&mut rows);
        let scale = 1.0 / (m as f64);
        let mut power = vec![0.0; len];
        for row in rows.chunks_exact(len) {
            power.iter_mut().zip(row).for_each(|(p, z)| *p += z.norm_sqr());
        }
        let norms = power.into_iter().map(|p| (p * scale).sqrt()).collect();
        Ok(AzimuthProfile::from_natural_order(norms, oversample, self.geometry))
    }

    /// Detections from the estimator's own profile.
    ///
    /// On the plain grid this is the profile peak picker alone. The
    /// interpolated estimator then refines all tones jointly: each UE is
    /// re-estimated on the frame with the other UEs' fitted tones removed,
    /// which separates UEs closer than a main-lobe width.
    pub fn detect_ues(&self, compressed: &FrameGrid, expected: usize) -> Result<(AzimuthProfile, Vec<UeDetection>)> {
        let profile = self.doppler_profile(compressed)?;
        let mut detections = profile.detect(expected)?;
        if self.estimation == Estimation::Interpolated {
            let bins = self.refine_jointly(compressed, expected)?;
            detections = bins
                .into_iter()
                .map(|(bin, mag)| UeDetection::from_bin(0, bin, mag, &self.geometry))
                .collect();
            detections.sort_by(|a, b| b.peak_magnitude.total_cmp(&a.peak_magnitude));
            for (rank, d) in detections.iter_mut().enumerate() {
                d.ue_index = rank;
            }
        }
        Ok((profile, detections))
    }

    /// Sequential tone extraction with cyclic re-estimation. Returns
    /// `(bin, column-norm magnitude)` per tone.
    fn refine_jointly(&self, compressed: &FrameGrid, expected: usize) -> Result<Vec<(f64, f64)>> {
        let mut tones: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(expected);
        let mut mags = Vec::with_capacity(expected);
        for _ in 0..expected {
            let residual = self.residual(compressed, &tones, None);
            let (bin, mag) = self.profile_with(&residual, PROFILE_OVERSAMPLE, self.profile_fft.as_ref())?.strongest();
            tones.push((bin, tone_amplitudes(&residual, bin)));
            mags.push(mag);
            for _ in 0..JOINT_ITERATIONS {
                let mut moved: f64 = 0.0;
                for i in 0..tones.len() {
                    let residual = self.residual(compressed, &tones, Some(i));
                    let (bin, mag) = local_peak(&residual, tones[i].0);
                    moved = moved.max((bin - tones[i].0).abs());
                    tones[i] = (bin, tone_amplitudes(&residual, bin));
                    mags[i] = mag;
                }
                if moved < 1e-6 {
                    break;
                }
            }
        }
        let m = self.ofdm.symbols as f64;
        Ok(tones
            .into_iter()
            .zip(mags)
            .map(|((bin, _), mag)| ((bin + 0.5 * m).rem_euclid(m) - 0.5 * m, mag))
            .collect())
    }

    /// Frame minus all fitted tones except `keep`.
    fn residual(&self, compressed: &FrameGrid, tones: &[(f64, Vec<Complex64>)], keep: Option<usize>) -> FrameGrid {
        let mut out = compressed.clone();
        let m = compressed.cols();
        for (i, (bin, amps)) in tones.iter().enumerate() {
            if Some(i) == keep {
                continue;
            }
            for j in 0..m {
                let w = Complex64::from_polar(1.0, TAU * bin * j as f64 / m as f64);
                out.column_mut(j).iter_mut().zip(amps).for_each(|(z, a)| *z -= a * w);
            }
        }
        out
    }

    pub fn steering_vector(&self, theta_rad: f64) -> SteeringVector {
        SteeringVector::new(theta_rad, &self.geometry)
    }

    /// `r_az b`: weighted sum of the `M` columns.
    pub fn beamsteer(&self, compressed: &FrameGrid, steering: &SteeringVector) -> Result<Vec<Complex64>> {
        self.check_grid(compressed)?;
        if steering.len() != compressed.cols() {
            return Err(Error::LengthMismatch { what: "steering vector", expected: compressed.cols(), actual: steering.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); compressed.rows()];
        for (col, &b) in compressed.columns().zip(steering.weights()) {
            out.iter_mut().zip(col).for_each(|(o, z)| *o += z * b);
        }
        Ok(out)
    }

    /// Frequency response seen after steering toward `detection` and Doppler
    /// correction, for a UE at `ue` received with amplitude `amplitude`.
    ///
    /// Ignores the inter-carrier leakage of a Doppler mismatch and keeps only
    /// its combining loss.
    pub fn ideal_channel(&self, ue: &UePosition, amplitude: f64, detection: &UeDetection) -> Result<Vec<Complex64>> {
        let g = &self.geometry;
        let f = g.doppler_after_compression(ue)?;
        let x = ue.cross_range_m;
        let r0 = g.orbit.height_m;
        let lambda = g.carrier.wavelength_m;
        let offset = TAU * ((x * x + g.window.aperture_m * x) / (2.0 * r0 * lambda)).fract()
            + TAU * f * self.ofdm.cp_duration_s();
        let dt = f - detection.f_hat;
        let m = self.ofdm.symbols;
        let combining: Complex64 = (0..m)
            .map(|i| Complex64::from_polar(1.0, TAU * dt * i as f64 * g.window.symbol_duration_s))
            .sum::<Complex64>()
            / (m as f64).sqrt();
        let common = combining * Complex64::from_polar(amplitude, offset);
        let n = self.ofdm.subcarriers;
        let per_bin = (ue.slant_range_m * self.ofdm.bandwidth_hz() / SPEED_OF_LIGHT / n as f64).fract();
        Ok((0..n)
            .map(|k| common * Complex64::from_polar(1.0, -TAU * (k as f64 * per_bin).fract()))
            .collect())
    }

    /// Steering, Doppler correction, demodulation, ZF and soft demapping for
    /// one detected UE on an already compressed frame.
    pub fn receive_ue(
        &self,
        compressed: &FrameGrid,
        detection: &UeDetection,
        pilots: &PilotLayout,
        csi: Csi<'_>,
        noise_var: f64,
    ) -> Result<ReceivedUe> {
        let steering = self.steering_vector(detection.theta_hat);
        let mut combined = self.beamsteer(compressed, &steering)?;
        doppler_correct(&mut combined, detection.f_hat, self.ofdm.bandwidth_hz());
        let freq = self.modem.demod_column(&combined)?;
        let equalizer = match csi {
            Csi::Pilot => estimate_channel(&freq, pilots)?,
            Csi::Ideal(h) => {
                if h.len() != freq.len() {
                    return Err(Error::LengthMismatch { what: "ideal channel", expected: freq.len(), actual: h.len() });
                }
                h.iter().map(|z| z.inv()).collect()
            }
        };
        let equalized = zf_equalize(&freq, &equalizer, noise_var)?;
        let data = pilots.extract_data(&equalized.symbols);
        let vars = pilots.extract_data(&equalized.noise_var);
        let llrs = llr_demap_weighted(&data, &vars)?;
        if let Some(pos) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLlr(pos));
        }
        Ok(ReceivedUe { detection: *detection, llrs, equalized })
    }

    /// Full chain from a received stream: compression, detection of
    /// `expected` UEs and the per-UE chain with pilot CSI. Detections are
    /// returned in order of increasing cross range.
    pub fn receive_stream(
        &self,
        stream: &[Complex64],
        expected: usize,
        pilots: &PilotLayout,
        noise_var: f64,
    ) -> Result<(AzimuthProfile, Vec<ReceivedUe>)> {
        let compressed = self.azimuth_compress(&self.strip_cp(stream)?)?;
        let (profile, mut detections) = self.detect_ues(&compressed, expected)?;
        detections.sort_by(|a, b| a.x_hat.total_cmp(&b.x_hat));
        let out = detections
            .iter()
            .map(|d| self.receive_ue(&compressed, d, pilots, Csi::Pilot, noise_var))
            .collect::<Result<Vec<_>>>()?;
        Ok((profile, out))
    }
}
