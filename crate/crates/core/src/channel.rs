//! Moving-satellite line-of-sight uplink channel.
//!
//! Each UE stream is scaled by the antenna gains and the frame-constant
//! attenuation, picks up the frequency-domain phase ramp of its bulk delay
//! (timing itself is ideal), and is rotated sample by sample by the carrier
//! phase history seen from the moving satellite. Noise is added once, after
//! all UEs are superposed.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{PhaseModel, SacGeometry, UePosition};
use crate::ofdm::{OfdmConfig, UnitaryDft};
use crate::units::{db_to_linear, dbm_to_watt, linear_to_db, BOLTZMANN, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// `20 log10(4 pi d / lambda)` (dB).
pub fn free_space_path_loss_db(distance_m: f64, wavelength_m: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m / wavelength_m).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub path_loss_db: f64,
    pub atmospheric_loss_db: f64,
    pub scintillation_loss_db: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
}

impl LinkBudget {
    /// Handheld UE array to a LEO payload at 3.5 GHz with the given path loss.
    pub fn leo_uplink(path_loss_db: f64) -> Self {
        Self {
            tx_gain_dbi: 11.72,
            rx_gain_dbi: 30.0,
            path_loss_db,
            atmospheric_loss_db: 0.12,
            scintillation_loss_db: 4.39,
            noise_figure_db: 4.0,
            temperature_k: 290.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.tx_gain_dbi,
            self.rx_gain_dbi,
            self.path_loss_db,
            self.atmospheric_loss_db,
            self.scintillation_loss_db,
            self.noise_figure_db,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("link budget terms must be finite".into()));
        }
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be > 0 K, got {}", self.temperature_k)));
        }
        Ok(())
    }

    pub fn total_loss_db(&self) -> f64 {
        self.path_loss_db + self.atmospheric_loss_db + self.scintillation_loss_db
    }

    /// Amplitude factor `alpha = 10^(-loss/20)`.
    pub fn attenuation_amplitude(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 20.0)
    }

    /// `sqrt(G_Tx G_Rx)` in linear amplitude.
    pub fn antenna_gain_amplitude(&self) -> f64 {
        db_to_linear(self.tx_gain_dbi + self.rx_gain_dbi).sqrt()
    }

    /// Received amplitude per unit transmit amplitude.
    pub fn channel_amplitude(&self) -> f64 {
        self.antenna_gain_amplitude() * self.attenuation_amplitude()
    }

    pub fn noise_model(&self, cfg: &OfdmConfig) -> NoiseModel {
        NoiseModel::thermal(cfg.spacing_hz, cfg.subcarriers, self.temperature_k, self.noise_figure_db)
    }

    /// Per-subcarrier SNR after combining with `processing_gain_db`, ideal
    /// CSI and uniform power over `bandwidth_hz` (dB).
    pub fn predicted_snr_db(&self, tx_power_dbm: f64, processing_gain_db: f64, bandwidth_hz: f64) -> f64 {
        let signal_dbw = tx_power_dbm - 30.0 + self.tx_gain_dbi + self.rx_gain_dbi + processing_gain_db
            - self.total_loss_db();
        let noise_dbw = linear_to_db(BOLTZMANN * bandwidth_hz * self.temperature_k) + self.noise_figure_db;
        signal_dbw - noise_dbw
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// `k_B delta_f T NF` (W).
    pub per_subcarrier_power_w: f64,
    /// `N P_eta`: per-sample variance at rate `B`, equal to the per-subcarrier
    /// variance after a unitary DFT (W).
    pub variance_w: f64,
}

impl NoiseModel {
    pub fn thermal(spacing_hz: f64, subcarriers: usize, temperature_k: f64, noise_figure_db: f64) -> Self {
        let per_subcarrier_power_w = BOLTZMANN * spacing_hz * temperature_k * db_to_linear(noise_figure_db);
        Self { per_subcarrier_power_w, variance_w: subcarriers as f64 * per_subcarrier_power_w }
    }

    pub fn silent() -> Self {
        Self { per_subcarrier_power_w: 0.0, variance_w: 0.0 }
    }
}

/// Adds circularly-symmetric complex Gaussian noise of variance `variance_w`.
pub fn add_awgn<R: Rng + ?Sized>(stream: &mut [Complex64], noise: &NoiseModel, rng: &mut R) {
    if noise.variance_w <= 0.0 {
        return;
    }
    let sigma = (noise.variance_w).sqrt() * FRAC_1_SQRT_2;
    for z in stream {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(re, im) * sigma;
    }
}

/// Element-wise sum of equally long streams.
pub fn superpose(streams: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let Some(first) = streams.first() else {
        return Err(Error::InvalidConfig("nothing to superpose".into()));
    };
    let mut out = first.clone();
    for s in &streams[1..] {
        if s.len() != out.len() {
            return Err(Error::LengthMismatch { what: "superposed stream", expected: out.len(), actual: s.len() });
        }
        out.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// One UE's serial transmit signal at sample rate `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct UeTransmit {
    pub ue_id: u32,
    pub position: UePosition,
    pub tx_power_dbm: f64,
    pub samples: Vec<Complex64>,
}

impl UeTransmit {
    /// Scales a unit-mean-power stream to the transmit power.
    pub fn from_unit_power(ue_id: u32, position: UePosition, tx_power_dbm: f64, mut samples: Vec<Complex64>) -> Self {
        let amp = dbm_to_watt(tx_power_dbm).sqrt();
        samples.iter_mut().for_each(|z| *z *= amp);
        Self { ue_id, position, tx_power_dbm, samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Per-sample carrier phase from the moving satellite.
    TimeVarying(PhaseModel),
    /// Carrier phase frozen at its aperture-centre value, as if the Doppler
    /// history had been removed with perfect knowledge of the UE position.
    PrecompensatedTruth,
}

impl Default for ChannelMode {
    fn default() -> Self {
        Self::TimeVarying(PhaseModel::Fresnel)
    }
}

/// Delay ramp and per-sample gain/phase of one UE's path.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPath {
    position: UePosition,
    ramp: Vec<Complex64>,
    rotation: Vec<Complex64>,
}

/// LoS channel bound to one aperture and numerology.
#[derive(Debug, Clone)]
pub struct LosChannel {
    geometry: SacGeometry,
    ofdm: OfdmConfig,
    budget: LinkBudget,
    mode: ChannelMode,
    dft: UnitaryDft,
}

impl LosChannel {
    pub fn new(geometry: SacGeometry, ofdm: OfdmConfig, budget: LinkBudget, mode: ChannelMode) -> Result<Self> {
        budget.validate()?;
        let t = ofdm.symbol_duration_s();
        if geometry.window.symbols != ofdm.symbols
            || (geometry.window.symbol_duration_s - t).abs() > 1e-12 * t
        {
            return Err(Error::InvalidConfig("acquisition window does not match the OFDM numerology".into()));
        }
        Ok(Self { geometry, ofdm, budget, mode, dft: UnitaryDft::new(ofdm.subcarriers) })
    }

    pub fn geometry(&self) -> &SacGeometry {
        &self.geometry
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    /// Bulk delay in samples, `R_UE B / c0`.
    pub fn delay_samples(&self, ue: &UePosition) -> f64 {
        ue.slant_range_m * self.ofdm.bandwidth_hz() / SPEED_OF_LIGHT
    }

    /// `exp(-j 2 pi k R_UE B / (c0 N))` for `k = 0..N`.
    pub fn delay_ramp(&self, ue: &UePosition) -> Vec<Complex64> {
        let n = self.ofdm.subcarriers as f64;
        let per_bin = (self.delay_samples(ue) / n).fract();
        (0..self.ofdm.subcarriers)
            .map(|k| Complex64::from_polar(1.0, -TAU * (k as f64 * per_bin).fract()))
            .collect()
    }

    /// Precomputes everything about a UE's path that does not depend on
    /// the transmitted samples.
    pub fn prepare(&self, ue: &UePosition) -> PreparedPath {
        let gain = self.budget.channel_amplitude();
        let ts = 1.0 / self.ofdm.bandwidth_hz();
        let centre = self.mode_centre_phase(ue);
        let rotation = (0..self.ofdm.frame_samples())
            .map(|j| {
                let phase = match self.mode {
                    ChannelMode::TimeVarying(model) => self.geometry.carrier_phase_wrapped(j as f64 * ts, ue, model),
                    ChannelMode::PrecompensatedTruth => centre,
                };
                Complex64::from_polar(gain, phase)
            })
            .collect();
        PreparedPath { position: *ue, ramp: self.delay_ramp(ue), rotation }
    }

    /// Noise-free received stream of one UE.
    pub fn apply(&self, tx: &UeTransmit) -> Result<Vec<Complex64>> {
        self.apply_prepared(tx, &self.prepare(&tx.position))
    }

    /// [`Self::apply`] with a path from [`Self::prepare`].
    pub fn apply_prepared(&self, tx: &UeTransmit, path: &PreparedPath) -> Result<Vec<Complex64>> {
        let sps = self.ofdm.samples_per_symbol();
        let expected = self.ofdm.frame_samples();
        if tx.samples.len() != expected {
            return Err(Error::LengthMismatch { what: "transmit stream", expected, actual: tx.samples.len() });
        }
        if path.position != tx.position || path.rotation.len() != expected {
            return Err(Error::InvalidConfig("prepared path belongs to another UE or numerology".into()));
        }
        let (n, cp) = (self.ofdm.subcarriers, self.ofdm.cp_len);
        let mut out = Vec::with_capacity(expected);
        let mut useful = vec![Complex64::new(0.0, 0.0); n];
        for sym in tx.samples.chunks_exact(sps) {
            useful.copy_from_slice(&sym[cp..]);
            self.dft.forward(&mut useful);
            useful.iter_mut().zip(&path.ramp).for_each(|(z, r)| *z *= r);
            self.dft.inverse(&mut useful);
            out.extend_from_slice(&useful[n - cp..]);
            out.extend_from_slice(&useful);
        }
        out.iter_mut().zip(&path.rotation).for_each(|(z, r)| *z *= r);
        Ok(out)
    }

    fn mode_centre_phase(&self, ue: &UePosition) -> f64 {
        let t_mid = 0.5 * self.geometry.window.frame_duration_s;
        self.geometry.carrier_phase_wrapped(t_mid, ue, PhaseModel::Fresnel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AcquisitionWindow, CarrierConfig, OrbitGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(symbols: usize) -> (SacGeometry, OfdmConfig) {
        let orbit = OrbitGeometry::leo_600km();
        let carrier = CarrierConfig::new(3.5e9).unwrap();
        let ofdm = OfdmConfig::new(300, 21, 15e3, symbols).unwrap();
        let window = AcquisitionWindow::new(&orbit, symbols, ofdm.symbol_duration_s()).unwrap();
        (SacGeometry::new(orbit, carrier, window), ofdm)
    }

    fn random_stream(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * FRAC_1_SQRT_2
            })
            .collect()
    }

    #[test]
    fn free_space_loss_at_600km() {
        let fspl = free_space_path_loss_db(600e3, SPEED_OF_LIGHT / 3.5e9);
        assert!((fspl - 158.89).abs() < 0.02, "{fspl}");
    }

    #[test]
    fn attenuation_values() {
        let b = LinkBudget::leo_uplink(158.89);
        assert!((b.total_loss_db() - 163.40).abs() < 0.01);
        assert!((b.attenuation_amplitude() - 6.76e-9).abs() < 0.01e-9);
        let lossless = LinkBudget { path_loss_db: 0.0, atmospheric_loss_db: 0.0, scintillation_loss_db: 0.0, ..b };
        assert_eq!(lossless.attenuation_amplitude(), 1.0);
    }

    #[test]
    fn noise_power_per_subcarrier() {
        let n = NoiseModel::thermal(15e3, 300, 290.0, 4.0);
        let dbm = crate::units::watt_to_dbm(n.per_subcarrier_power_w);
        assert!((dbm - (-174.0 + linear_to_db(15e3) + 4.0)).abs() < 0.05, "{dbm}");
        assert!((dbm + 128.2).abs() < 0.05);
        assert!((n.variance_w - 300.0 * n.per_subcarrier_power_w).abs() < 1e-30);
    }

    #[test]
    fn snr_prediction_at_minus_10_dbm() {
        let b = LinkBudget::leo_uplink(158.89);
        let snr = b.predicted_snr_db(-10.0, linear_to_db(93.0), 4.5e6);
        assert!((snr + 8.5).abs() < 0.1, "{snr}");
    }

    #[test]
    fn awgn_variance_and_determinism() {
        let noise = NoiseModel { per_subcarrier_power_w: 1.0, variance_w: 2.5 };
        let mut a = vec![Complex64::new(0.0, 0.0); 1_000_000];
        add_awgn(&mut a, &noise, &mut ChaCha8Rng::seed_from_u64(9));
        let var = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((var / 2.5 - 1.0).abs() < 0.01, "{var}");
        let mut b = vec![Complex64::new(0.0, 0.0); 1_000_000];
        add_awgn(&mut b, &noise, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let mut c = vec![Complex64::new(1.0, -1.0); 10];
        add_awgn(&mut c, &NoiseModel::silent(), &mut ChaCha8Rng::seed_from_u64(9));
        assert!(c.iter().all(|&z| z == Complex64::new(1.0, -1.0)));
    }

    #[test]
    fn superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_stream(&mut rng, 30_000);
        assert_eq!(superpose(std::slice::from_ref(&s)).unwrap(), s);
        let neg: Vec<Complex64> = s.iter().map(|z| -z).collect();
        assert!(superpose(&[s.clone(), neg]).unwrap().iter().all(|z| z.norm() < 1e-15));
        let t = random_stream(&mut rng, 30_000);
        let p = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        let ratio = p(&superpose(&[s.clone(), t]).unwrap()) / p(&s);
        assert!((ratio - 2.0).abs() < 0.06, "{ratio}");
        assert!(superpose(&[s.clone(), s[1..].to_vec()]).is_err());
        assert!(superpose(&[]).is_err());
    }

    #[test]
    fn output_power_scales_with_gain() {
        let (g, ofdm) = setup(4);
        let budget = LinkBudget::leo_uplink(158.89);
        let ch = LosChannel::new(g, ofdm, budget, ChannelMode::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_stream(&mut rng, ofdm.frame_samples());
        let tx = UeTransmit::from_unit_power(0, g.ue(200.0), 0.0, s.clone());
        let rx = ch.apply(&tx).unwrap();
        // The delay ramp is a circular shift of each symbol body, so power is
        // preserved exactly on the CP-free part.
        let body_power =
            |v: &[Complex64]| v.chunks_exact(321).flat_map(|c| &c[21..]).map(|z| z.norm_sqr()).sum::<f64>();
        let pin = body_power(&tx.samples);
        let pout = body_power(&rx);
        let a = budget.channel_amplitude();
        assert!((pout / (pin * a * a) - 1.0).abs() < 1e-9);
        assert!(ch.apply(&UeTransmit { samples: s[1..].to_vec(), ..tx }).is_err());
    }

    #[test]
    fn channel_is_linear() {
        let (g, ofdm) = setup(2);
        let ch = LosChannel::new(g, ofdm, LinkBudget::leo_uplink(158.89), ChannelMode::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_stream(&mut rng, ofdm.frame_samples());
        let a = Complex64::new(0.3, -1.7);
        let scaled: Vec<Complex64> = s.iter().map(|z| z * a).collect();
        let ue = g.ue(-300.0);
        let r1 = ch.apply(&UeTransmit { ue_id: 0, position: ue, tx_power_dbm: 0.0, samples: s }).unwrap();
        let r2 = ch.apply(&UeTransmit { ue_id: 0, position: ue, tx_power_dbm: 0.0, samples: scaled }).unwrap();
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x * a - y).norm() <= 1e-12 * y.norm().max(1e-300) + 1e-25);
        }
    }

    #[test]
    fn nadir_symbol_phase_is_nearly_constant() {
        let (g, ofdm) = setup(93);
        let ch = LosChannel::new(g, ofdm, LinkBudget::leo_uplink(0.0), ChannelMode::default()).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); ofdm.frame_samples()];
        // A constant stream is an all-DC OFDM signal: the delay ramp leaves it unchanged.
        let rx = ch.apply(&UeTransmit { ue_id: 0, position: g.ue(0.0), tx_power_dbm: 0.0, samples: ones }).unwrap();
        let mid = 46 * ofdm.samples_per_symbol();
        let expected = crate::units::wrap_phase(TAU * (600e3 / g.carrier.wavelength_m));
        for z in &rx[mid..mid + ofdm.samples_per_symbol()] {
            let d = crate::units::wrap_phase(z.arg() - expected);
            assert!(d.abs() < 1e-3, "{d}");
        }
    }

    #[test]
    fn per_symbol_phase_slope_tracks_doppler() {
        let (g, ofdm) = setup(93);
        let ch = LosChannel::new(g, ofdm, LinkBudget::leo_uplink(0.0), ChannelMode::default()).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); ofdm.frame_samples()];
        let ue = g.ue(495.33);
        let rx = ch.apply(&UeTransmit { ue_id: 0, position: ue, tx_power_dbm: 0.0, samples: ones }).unwrap();
        let sps = ofdm.samples_per_symbol();
        let ts = 1.0 / ofdm.bandwidth_hz();
        for m in [0usize, 10, 46, 80, 92] {
            let sym = &rx[m * sps..(m + 1) * sps];
            let lag: Complex64 = sym.windows(2).map(|w| w[1] * w[0].conj()).sum();
            let f_est = lag.arg() / (TAU * ts);
            let t_mid = (m as f64 + 0.5) * ofdm.symbol_duration_s();
            let f_true = g.doppler_true(t_mid, &ue);
            assert!((f_est - f_true).abs() < 0.01 * f_true.abs(), "m={m}: {f_est} vs {f_true}");
        }
    }

    #[test]
    fn precompensated_mode_has_constant_phase() {
        let (g, ofdm) = setup(8);
        let ch = LosChannel::new(g, ofdm, LinkBudget::leo_uplink(0.0), ChannelMode::PrecompensatedTruth).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); ofdm.frame_samples()];
        let rx = ch.apply(&UeTransmit { ue_id: 0, position: g.ue(700.0), tx_power_dbm: 0.0, samples: ones }).unwrap();
        assert!(rx.windows(2).all(|w| (w[1] - w[0]).norm() < 1e-9));
    }

    #[test]
    fn window_must_match_numerology() {
        let (g, _) = setup(93);
        let other = OfdmConfig::new(300, 21, 15e3, 92).unwrap();
        assert!(LosChannel::new(g, other, LinkBudget::leo_uplink(0.0), ChannelMode::default()).is_err());
    }
}
