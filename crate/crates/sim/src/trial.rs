//! One Monte Carlo trial: every UE encodes and transmits a frame, the
//! satellite receives the superposition plus noise and decodes each UE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sac_core::channel::{add_awgn, superpose, ChannelMode, LosChannel, NoiseModel, PreparedPath, UeTransmit};
use sac_core::fec::{PolarCode, PolarConfig};
use sac_core::geometry::{SacGeometry, UePosition};
use sac_core::ofdm::{build_frame, map_bits, FrameGrid, OfdmConfig, OfdmModem, PilotLayout};
use sac_core::receiver::{AzimuthProfile, Csi, Estimation, SacReceiver, UeDetection, PROFILE_OVERSAMPLE};
use sac_core::units::dbm_to_watt;
use sac_core::Complex64;

use crate::config::{CsiMode, DoaMode, Mode, ScenarioConfig};
use crate::error::Result;
use crate::seed::{self, NOISE_STREAM, PILOT_STREAM, PROFILE_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub struct UeOutcome {
    pub ue_id: usize,
    pub x_true_m: f64,
    pub crc_ok: bool,
    pub bit_errors: usize,
    /// CRC failure or any residual bit error.
    pub block_error: bool,
    /// NaN when the receiver failed before detection.
    pub x_hat_m: f64,
    pub f_hat_hz: f64,
    /// Post-combining, post-equalization SNR measured on the data symbols.
    pub snr_db: f64,
    /// Receiver error, counted as a block error.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    pub ues: Vec<UeOutcome>,
}

struct UeSetup {
    position: UePosition,
    path: PreparedPath,
    ptx_offset_db: f64,
}

/// Everything a trial needs, built once per run.
pub struct Scenario {
    cfg: ScenarioConfig,
    geometry: SacGeometry,
    ofdm: OfdmConfig,
    modem: OfdmModem,
    channel: LosChannel,
    receiver: SacReceiver,
    code: PolarCode,
    noise: NoiseModel,
    ues: Vec<UeSetup>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Scenario {
    /// Builds the scenario actually simulated (see [`ScenarioConfig::effective`]).
    pub fn new(requested: &ScenarioConfig) -> Result<Self> {
        requested.validate()?;
        let cfg = requested.effective();
        let geometry = cfg.geometry()?;
        let ofdm = cfg.ofdm()?;
        let budget = cfg.budget()?;
        let channel = LosChannel::new(geometry, ofdm, budget, ChannelMode::default())?;
        // A single symbol has no aperture to interpolate over.
        let estimation = if cfg.mode == Mode::NoSac { Estimation::Grid } else { cfg.estimation };
        let receiver = SacReceiver::new(geometry, ofdm, estimation)?;
        let mut ues = Vec::with_capacity(cfg.ues.len());
        for ue in &cfg.ues {
            let position = geometry.ue(ue.x_m);
            ues.push(UeSetup {
                position,
                path: channel.prepare(&position),
                ptx_offset_db: ue.ptx_offset_db,
            });
        }
        let e = 2 * cfg.pilots(0, 0)?.data_len();
        let code = PolarCode::new(PolarConfig {
            list_size: cfg.list_size,
            design_snr_db: cfg.design_snr_db,
            ..PolarConfig::new(cfg.k_info, e)?
        })?;
        let noise = budget.noise_model(&ofdm);
        Ok(Self { cfg, geometry, ofdm, modem: OfdmModem::new(ofdm), channel, receiver, code, noise, ues })
    }

    /// The effective configuration.
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &SacGeometry {
        &self.geometry
    }

    pub fn receiver(&self) -> &SacReceiver {
        &self.receiver
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Link-budget SNR per subcarrier after combining, in dB.
    pub fn predicted_snr_db(&self, ptx_dbm: f64) -> f64 {
        let gain = 10.0 * (self.ofdm.symbols as f64).log10();
        self.channel.budget().predicted_snr_db(ptx_dbm, gain, self.ofdm.bandwidth_hz())
    }

    /// Unit-power transmit stream of one UE, with its info bits and the
    /// frequency-domain symbol.
    fn transmit(&self, pilots: &PilotLayout, rng: &mut ChaCha8Rng) -> Result<(Vec<u8>, Vec<Complex64>, Vec<Complex64>)> {
        let info: Vec<u8> = (0..self.cfg.k_info).map(|_| rng.random_range(0..2u8)).collect();
        let data = map_bits(&self.code.encode(&info)?)?;
        let grid = build_frame(&data, pilots, &self.ofdm)?;
        let samples = self.modem.modulate(&grid)?;
        Ok((info, samples, grid.column(0).to_vec()))
    }

    /// Received stream for one trial, plus the per-UE info bits and symbols.
    #[allow(clippy::type_complexity)]
    fn received(
        &self,
        ptx_dbm: f64,
        pilots: &[PilotLayout],
        seeds: impl Fn(u64) -> u64,
    ) -> Result<(Vec<Complex64>, Vec<(Vec<u8>, Vec<Complex64>)>)> {
        let mut streams = Vec::with_capacity(self.ues.len());
        let mut sent = Vec::with_capacity(self.ues.len());
        for (i, ue) in self.ues.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds(i as u64));
            let (info, samples, symbol) = self.transmit(&pilots[i], &mut rng)?;
            let tx = UeTransmit::from_unit_power(i as u32, ue.position, ptx_dbm + ue.ptx_offset_db, samples);
            streams.push(self.channel.apply_prepared(&tx, &ue.path)?);
            sent.push((info, symbol));
        }
        let mut rx = superpose(&streams)?;
        if self.cfg.noise {
            add_awgn(&mut rx, &self.noise, &mut ChaCha8Rng::seed_from_u64(seeds(NOISE_STREAM)));
        }
        Ok((rx, sent))
    }

    /// Detections in UE order: by true position, or estimated and matched
    /// to the UEs by cross-range rank.
    fn detections(&self, compressed: &FrameGrid) -> Result<Vec<UeDetection>> {
        if self.cfg.mode == Mode::NoSac || self.cfg.doa == DoaMode::Truth {
            return self
                .ues
                .iter()
                .enumerate()
                .map(|(i, u)| Ok(UeDetection::from_truth(i, u.position.cross_range_m, &self.geometry)?))
                .collect();
        }
        let (_, mut found) = self.receiver.detect_ues(compressed, self.ues.len())?;
        found.sort_by(|a, b| a.x_hat.total_cmp(&b.x_hat));
        let mut order: Vec<usize> = (0..self.ues.len()).collect();
        order.sort_by(|&a, &b| self.ues[a].position.cross_range_m.total_cmp(&self.ues[b].position.cross_range_m));
        let mut out = vec![found[0]; self.ues.len()];
        for (rank, &ue) in order.iter().enumerate() {
            out[ue] = found[rank];
        }
        Ok(out)
    }

    /// Pilot combs of all UEs for one frame.
    pub fn frame_pilots(&self, point: u64, trial: u64) -> Result<Vec<PilotLayout>> {
        (0..self.ues.len())
            .map(|i| self.cfg.pilots(i as u32, seed::derive(self.cfg.seed, point, trial, PILOT_STREAM + i as u64)))
            .collect()
    }

    pub fn run_trial(&self, point: usize, ptx_dbm: f64, trial: usize) -> Result<TrialRecord> {
        let base = self.cfg.seed;
        let pilots = self.frame_pilots(point as u64, trial as u64)?;
        let (rx, sent) = self.received(ptx_dbm, &pilots, |s| seed::derive(base, point as u64, trial as u64, s))?;
        let noise_var = self.noise.variance_w;

        let failed = |msg: String| -> Vec<UeOutcome> {
            self.ues
                .iter()
                .enumerate()
                .map(|(i, u)| UeOutcome {
                    ue_id: i,
                    x_true_m: u.position.cross_range_m,
                    crc_ok: false,
                    bit_errors: self.cfg.k_info,
                    block_error: true,
                    x_hat_m: f64::NAN,
                    f_hat_hz: f64::NAN,
                    snr_db: f64::NAN,
                    error: Some(msg.clone()),
                })
                .collect()
        };
        let compressed = self.receiver.azimuth_compress(&self.receiver.strip_cp(&rx)?)?;
        let detections = match self.detections(&compressed) {
            Ok(d) => d,
            Err(e) => return Ok(TrialRecord { point, trial, ues: failed(e.to_string()) }),
        };

        let amplitude_scale = self.channel.budget().channel_amplitude();
        let mut ues = Vec::with_capacity(self.ues.len());
        for (i, ((ue, det), pilots)) in self.ues.iter().zip(&detections).zip(&pilots).enumerate() {
            let (info, symbol) = &sent[i];
            let mut outcome = UeOutcome {
                ue_id: i,
                x_true_m: ue.position.cross_range_m,
                crc_ok: false,
                bit_errors: self.cfg.k_info,
                block_error: true,
                x_hat_m: det.x_hat,
                f_hat_hz: det.f_hat,
                snr_db: f64::NAN,
                error: None,
            };
            let ideal;
            let csi = match self.cfg.csi {
                CsiMode::Pilot => Csi::Pilot,
                CsiMode::Ideal => {
                    let amp = amplitude_scale * dbm_to_watt(ptx_dbm + ue.ptx_offset_db).sqrt();
                    ideal = self.receiver.ideal_channel(&ue.position, amp, det)?;
                    Csi::Ideal(&ideal)
                }
            };
            match self.receiver.receive_ue(&compressed, det, pilots, csi, noise_var) {
                Ok(r) => {
                    outcome.snr_db = measured_snr_db(
                        &pilots.extract_data(&r.equalized.symbols),
                        &pilots.extract_data(symbol),
                    );
                    let d = self.code.decode(&r.llrs)?;
                    outcome.crc_ok = d.crc_ok;
                    outcome.bit_errors = d.info_bits.iter().zip(info).filter(|(a, b)| a != b).count();
                    outcome.block_error = !d.crc_ok || outcome.bit_errors > 0;
                }
                Err(e) => outcome.error = Some(e.to_string()),
            }
            ues.push(outcome);
        }
        Ok(TrialRecord { point, trial, ues })
    }

    /// Compressed frame of trial `(point, trial)`, as the receiver sees it.
    pub fn compressed(&self, point: usize, ptx_dbm: f64, trial: usize) -> Result<FrameGrid> {
        let base = self.cfg.seed;
        let pilots = self.frame_pilots(point as u64, trial as u64)?;
        let (rx, _) = self.received(ptx_dbm, &pilots, |s| seed::derive(base, point as u64, trial as u64, s))?;
        Ok(self.receiver.azimuth_compress(&self.receiver.strip_cp(&rx)?)?)
    }

    /// One noise-on profile snapshot at `ptx_dbm`, with `P = 8` zero padding.
    pub fn profile_snapshot(&self, ptx_dbm: f64) -> Result<AzimuthProfile> {
        let base = self.cfg.seed;
        let pilots = self.frame_pilots(PROFILE_STREAM, 0)?;
        let (rx, _) = self.received(ptx_dbm, &pilots, |s| seed::derive(base, PROFILE_STREAM, 0, s))?;
        let compressed = self.receiver.azimuth_compress(&self.receiver.strip_cp(&rx)?)?;
        Ok(self.receiver.doppler_profile_oversampled(&compressed, PROFILE_OVERSAMPLE)?)
    }
}

/// `10 log10(mean |s|^2 / mean |y - s|^2)`.
pub fn measured_snr_db(received: &[Complex64], sent: &[Complex64]) -> f64 {
    let signal: f64 = sent.iter().map(|s| s.norm_sqr()).sum();
    let error: f64 = received.iter().zip(sent).map(|(y, s)| (y - s).norm_sqr()).sum();
    10.0 * (signal / error).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::parse(text).unwrap()
    }

    #[test]
    fn noiseless_single_ue_decodes() {
        let s = Scenario::new(&cfg("ue[0].x_m = 990.65\nrun.noise = off")).unwrap();
        let r = s.run_trial(0, -10.0, 0).unwrap();
        let u = &r.ues[0];
        assert!(u.crc_ok && !u.block_error && u.error.is_none(), "{u:?}");
        assert_eq!(u.bit_errors, 0);
        assert!((u.x_hat_m - 990.65).abs() < 5.0, "{}", u.x_hat_m);
        assert!(u.snr_db > 40.0, "{}", u.snr_db);
    }

    #[test]
    fn trial_is_deterministic() {
        let s = Scenario::new(&cfg("ue[0].x_m = -495.33\nue[1].x_m = 495.33")).unwrap();
        assert_eq!(s.run_trial(1, 0.0, 3).unwrap(), s.run_trial(1, 0.0, 3).unwrap());
        assert_ne!(s.run_trial(1, 0.0, 3).unwrap().ues[0].snr_db, s.run_trial(1, 0.0, 4).unwrap().ues[0].snr_db);
    }

    #[test]
    fn two_ues_matched_by_position() {
        let s = Scenario::new(&cfg("ue[0].x_m = 742.99\nue[1].x_m = -742.99\nrun.noise = off")).unwrap();
        let r = s.run_trial(0, 0.0, 0).unwrap();
        assert!(r.ues[0].x_hat_m > 0.0 && r.ues[1].x_hat_m < 0.0);
        assert!(r.ues.iter().all(|u| !u.block_error), "{r:?}");
    }

    #[test]
    fn nosac_baseline_decodes_at_high_power() {
        let s = Scenario::new(&cfg("ue[0].x_m = 300\nrun.mode = nosac")).unwrap();
        assert_eq!(s.config().symbols, 1);
        let r = s.run_trial(0, 40.0, 0).unwrap();
        assert_eq!(r.ues[0].x_true_m, 0.0);
        assert!(!r.ues[0].block_error, "{r:?}");
    }

    #[test]
    fn ideal_csi_decodes() {
        let s = Scenario::new(&cfg("ue[0].x_m = -200\nrun.csi = ideal\nrun.noise = off")).unwrap();
        let r = s.run_trial(0, -10.0, 0).unwrap();
        assert!(!r.ues[0].block_error, "{r:?}");
    }

    #[test]
    fn hopeless_power_fails() {
        let s = Scenario::new(&cfg("ue[0].x_m = 0")).unwrap();
        assert!(s.run_trial(0, -40.0, 0).unwrap().ues[0].block_error);
    }
}
