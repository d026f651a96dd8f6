//! Flat `key = value` scenario files.
//!
//! ```text
//! # scenario (a)
//! orbit.r0_m = 600000
//! ue[0].x_m = -495.33
//! ue[1].x_m = 495.33
//! sweep.ptx_dbm = [-4..10 step 1]
//! run.mode = sac
//! ```
//!
//! Every key has a default except the UE list. `#` starts a comment.
//! `budget.path_loss_db = auto` uses free-space loss at the orbit height.

use std::fmt::Write as _;
use std::str::FromStr;

use sac_core::channel::{free_space_path_loss_db, LinkBudget};
use sac_core::geometry::{AcquisitionWindow, CarrierConfig, OrbitGeometry, SacGeometry};
use sac_core::ofdm::{OfdmConfig, PilotLayout};
use sac_core::receiver::Estimation;
use sac_core::units::SPEED_OF_LIGHT;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sac,
    /// One symbol, one UE at nadir, no compression or combining.
    NoSac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    Pilot,
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaMode {
    Estimated,
    /// Steer toward the true positions.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotScrambling {
    /// One pilot sequence per UE for the whole run.
    Fixed,
    /// A fresh sequence per UE and frame, drawn from the trial seed.
    PerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeConfig {
    pub x_m: f64,
    /// Added to every sweep point for this UE.
    pub ptx_offset_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub r0_m: f64,
    pub velocity_mps: f64,
    pub carrier_hz: f64,
    pub subcarriers: usize,
    pub cp_len: usize,
    pub spacing_hz: f64,
    pub symbols: usize,
    pub pilot_spacing: usize,
    pub pilot_offset: usize,
    pub pilot_scrambling: PilotScrambling,
    pub k_info: usize,
    pub list_size: usize,
    pub design_snr_db: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    /// `None` = free-space loss at `r0_m`.
    pub path_loss_db: Option<f64>,
    pub atmospheric_loss_db: f64,
    pub scintillation_loss_db: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    pub ues: Vec<UeConfig>,
    pub sweep_ptx_dbm: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub csi: CsiMode,
    pub estimation: Estimation,
    pub doa: DoaMode,
    pub noise: bool,
    pub profile_ptx_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            r0_m: 600e3,
            velocity_mps: 7820.0,
            carrier_hz: 3.5e9,
            subcarriers: 300,
            cp_len: 21,
            spacing_hz: 15e3,
            symbols: 93,
            pilot_spacing: 4,
            pilot_offset: 0,
            pilot_scrambling: PilotScrambling::PerFrame,
            k_info: 300,
            list_size: 8,
            design_snr_db: 0.0,
            tx_gain_dbi: 11.72,
            rx_gain_dbi: 30.0,
            path_loss_db: None,
            atmospheric_loss_db: 0.12,
            scintillation_loss_db: 4.39,
            noise_figure_db: 4.0,
            temperature_k: 290.0,
            ues: Vec::new(),
            sweep_ptx_dbm: vec![-10.0],
            trials: 200,
            seed: 1,
            mode: Mode::Sac,
            csi: CsiMode::Pilot,
            estimation: Estimation::Interpolated,
            doa: DoaMode::Estimated,
            noise: true,
            profile_ptx_dbm: -10.0,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| SimError::Parse { line, msg: format!("{key}: cannot parse {v:?}") })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(SimError::Parse { line, msg: format!("{key}: expected on/off, got {v:?}") }),
    }
}

/// `[a..b step s]`, `[a, b, c]` or a single number.
pub fn parse_grid(v: &str) -> std::result::Result<Vec<f64>, String> {
    let v = v.trim();
    let Some(inner) = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
        return v.parse::<f64>().map(|x| vec![x]).map_err(|_| format!("bad number {v:?}"));
    };
    if let Some((range, step)) = inner.split_once("step") {
        let (a, b) = range.split_once("..").ok_or_else(|| format!("bad range {inner:?}"))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?}"));
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(format!("empty or descending range {inner:?}"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        // Rounded to 1e-9 so 0.1-style steps print cleanly.
        return Ok((0..count).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?}")))
        .collect()
}

fn grid_text(grid: &[f64]) -> String {
    let items: Vec<String> = grid.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut ues: Vec<Option<UeConfig>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| SimError::Parse { line, msg: format!("expected key = value, got {content:?}") })?;
            if let Some(rest) = key.strip_prefix("ue[") {
                let (index, field) = rest
                    .split_once("].")
                    .ok_or_else(|| SimError::Parse { line, msg: format!("bad UE key {key:?}") })?;
                let index: usize = parse_num(line, key, index)?;
                if index >= 64 {
                    return Err(SimError::Parse { line, msg: format!("UE index {index} too large") });
                }
                if ues.len() <= index {
                    ues.resize(index + 1, None);
                }
                let ue = ues[index].get_or_insert(UeConfig { x_m: f64::NAN, ptx_offset_db: 0.0 });
                match field {
                    "x_m" => ue.x_m = parse_num(line, key, value)?,
                    "ptx_offset_db" => ue.ptx_offset_db = parse_num(line, key, value)?,
                    _ => return Err(SimError::Parse { line, msg: format!("unknown UE field {field:?}") }),
                }
                continue;
            }
            cfg.set(line, key, value)?;
        }
        cfg.ues = ues
            .into_iter()
            .enumerate()
            .map(|(i, u)| match u {
                Some(u) if u.x_m.is_finite() => Ok(u),
                _ => Err(SimError::Config(format!("ue[{i}].x_m missing"))),
            })
            .collect::<Result<_>>()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "name" => self.name = v.to_string(),
            "orbit.r0_m" => self.r0_m = parse_num(line, key, v)?,
            "orbit.velocity_mps" => self.velocity_mps = parse_num(line, key, v)?,
            "carrier.fc_hz" => self.carrier_hz = parse_num(line, key, v)?,
            "ofdm.subcarriers" => self.subcarriers = parse_num(line, key, v)?,
            "ofdm.cp_len" => self.cp_len = parse_num(line, key, v)?,
            "ofdm.spacing_hz" => self.spacing_hz = parse_num(line, key, v)?,
            "ofdm.symbols" => self.symbols = parse_num(line, key, v)?,
            "pilots.spacing" => self.pilot_spacing = parse_num(line, key, v)?,
            "pilots.offset" => self.pilot_offset = parse_num(line, key, v)?,
            "pilots.scrambling" => {
                self.pilot_scrambling = match v {
                    "fixed" => PilotScrambling::Fixed,
                    "frame" => PilotScrambling::PerFrame,
                    _ => return Err(SimError::Parse { line, msg: format!("{key}: expected fixed|frame, got {v:?}") }),
                }
            }
            "fec.k_info" => self.k_info = parse_num(line, key, v)?,
            "fec.list_size" => self.list_size = parse_num(line, key, v)?,
            "fec.design_snr_db" => self.design_snr_db = parse_num(line, key, v)?,
            "budget.tx_gain_dbi" => self.tx_gain_dbi = parse_num(line, key, v)?,
            "budget.rx_gain_dbi" => self.rx_gain_dbi = parse_num(line, key, v)?,
            "budget.path_loss_db" => {
                self.path_loss_db = if v == "auto" { None } else { Some(parse_num(line, key, v)?) }
            }
            "budget.atmospheric_loss_db" => self.atmospheric_loss_db = parse_num(line, key, v)?,
            "budget.scintillation_loss_db" => self.scintillation_loss_db = parse_num(line, key, v)?,
            "budget.noise_figure_db" => self.noise_figure_db = parse_num(line, key, v)?,
            "budget.temperature_k" => self.temperature_k = parse_num(line, key, v)?,
            "sweep.ptx_dbm" => {
                self.sweep_ptx_dbm = parse_grid(v).map_err(|msg| SimError::Parse { line, msg: format!("{key}: {msg}") })?
            }
            "run.trials" => self.trials = parse_num(line, key, v)?,
            "run.seed" => self.seed = parse_num(line, key, v)?,
            "run.mode" => {
                self.mode = match v {
                    "sac" => Mode::Sac,
                    "nosac" => Mode::NoSac,
                    _ => return Err(SimError::Parse { line, msg: format!("{key}: expected sac|nosac, got {v:?}") }),
                }
            }
            "run.csi" => {
                self.csi = match v {
                    "pilot" => CsiMode::Pilot,
                    "ideal" => CsiMode::Ideal,
                    _ => return Err(SimError::Parse { line, msg: format!("{key}: expected pilot|ideal, got {v:?}") }),
                }
            }
            "run.estimation" => {
                self.estimation = match v {
                    "grid" => Estimation::Grid,
                    "interpolated" => Estimation::Interpolated,
                    _ => {
                        return Err(SimError::Parse { line, msg: format!("{key}: expected grid|interpolated, got {v:?}") })
                    }
                }
            }
            "run.doa" => {
                self.doa = match v {
                    "estimated" => DoaMode::Estimated,
                    "truth" => DoaMode::Truth,
                    _ => return Err(SimError::Parse { line, msg: format!("{key}: expected estimated|truth, got {v:?}") }),
                }
            }
            "run.noise" => self.noise = parse_bool(line, key, v)?,
            "run.profile_ptx_dbm" => self.profile_ptx_dbm = parse_num(line, key, v)?,
            _ => return Err(SimError::Parse { line, msg: format!("unknown key {key:?}") }),
        }
        Ok(())
    }

    /// Resolved key/value pairs, in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mode = match self.mode {
            Mode::Sac => "sac",
            Mode::NoSac => "nosac",
        };
        let csi = match self.csi {
            CsiMode::Pilot => "pilot",
            CsiMode::Ideal => "ideal",
        };
        let estimation = match self.estimation {
            Estimation::Grid => "grid",
            Estimation::Interpolated => "interpolated",
        };
        let doa = match self.doa {
            DoaMode::Estimated => "estimated",
            DoaMode::Truth => "truth",
        };
        let mut out: Vec<(String, String)> = vec![
            ("name".into(), self.name.clone()),
            ("orbit.r0_m".into(), self.r0_m.to_string()),
            ("orbit.velocity_mps".into(), self.velocity_mps.to_string()),
            ("carrier.fc_hz".into(), self.carrier_hz.to_string()),
            ("ofdm.subcarriers".into(), self.subcarriers.to_string()),
            ("ofdm.cp_len".into(), self.cp_len.to_string()),
            ("ofdm.spacing_hz".into(), self.spacing_hz.to_string()),
            ("ofdm.symbols".into(), self.symbols.to_string()),
            ("pilots.spacing".into(), self.pilot_spacing.to_string()),
            ("pilots.offset".into(), self.pilot_offset.to_string()),
            (
                "pilots.scrambling".into(),
                match self.pilot_scrambling {
                    PilotScrambling::Fixed => "fixed",
                    PilotScrambling::PerFrame => "frame",
                }
                .into(),
            ),
            ("fec.k_info".into(), self.k_info.to_string()),
            ("fec.list_size".into(), self.list_size.to_string()),
            ("fec.design_snr_db".into(), self.design_snr_db.to_string()),
            ("budget.tx_gain_dbi".into(), self.tx_gain_dbi.to_string()),
            ("budget.rx_gain_dbi".into(), self.rx_gain_dbi.to_string()),
            ("budget.path_loss_db".into(), self.path_loss_db.map_or("auto".into(), |v| v.to_string())),
            ("budget.atmospheric_loss_db".into(), self.atmospheric_loss_db.to_string()),
            ("budget.scintillation_loss_db".into(), self.scintillation_loss_db.to_string()),
            ("budget.noise_figure_db".into(), self.noise_figure_db.to_string()),
            ("budget.temperature_k".into(), self.temperature_k.to_string()),
        ];
        for (i, ue) in self.ues.iter().enumerate() {
            out.push((format!("ue[{i}].x_m"), ue.x_m.to_string()));
            out.push((format!("ue[{i}].ptx_offset_db"), ue.ptx_offset_db.to_string()));
        }
        out.extend([
            ("sweep.ptx_dbm".into(), grid_text(&self.sweep_ptx_dbm)),
            ("run.trials".into(), self.trials.to_string()),
            ("run.seed".into(), self.seed.to_string()),
            ("run.mode".into(), mode.into()),
            ("run.csi".into(), csi.into()),
            ("run.estimation".into(), estimation.into()),
            ("run.doa".into(), doa.into()),
            ("run.noise".into(), if self.noise { "on" } else { "off" }.into()),
            ("run.profile_ptx_dbm".into(), self.profile_ptx_dbm.to_string()),
        ]);
        out
    }

    /// The config as a parseable document.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.ues.is_empty() {
            return bad("at least one UE (ue[0].x_m) is required".into());
        }
        if self.trials == 0 {
            return bad("run.trials must be >= 1".into());
        }
        if self.sweep_ptx_dbm.is_empty() || self.sweep_ptx_dbm.iter().any(|p| !p.is_finite()) {
            return bad("sweep.ptx_dbm must be a non-empty list of finite values".into());
        }
        if self.name.contains('\n') {
            return bad("name must be a single line".into());
        }
        let geometry = self.geometry()?;
        for (i, ue) in self.ues.iter().enumerate() {
            geometry.check_small_angle(ue.x_m).map_err(|e| SimError::Config(format!("ue[{i}]: {e}")))?;
        }
        if self.ues.len() > self.symbols {
            return bad(format!("{} UEs cannot be separated with {} symbols", self.ues.len(), self.symbols));
        }
        self.budget()?.validate()?;
        let pilots = self.pilots(0, 0)?;
        let e = 2 * pilots.data_len();
        sac_core::fec::PolarConfig { k_info: self.k_info, list_size: self.list_size, design_snr_db: self.design_snr_db, ..sac_core::fec::PolarConfig::new(self.k_info.max(1), e)? }
            .validate()?;
        Ok(())
    }

    /// The configuration actually simulated: the no-SAC baseline collapses
    /// to one symbol and one UE at nadir.
    pub fn effective(&self) -> Self {
        match self.mode {
            Mode::Sac => self.clone(),
            Mode::NoSac => Self {
                symbols: 1,
                ues: vec![UeConfig { x_m: 0.0, ptx_offset_db: self.ues.first().map_or(0.0, |u| u.ptx_offset_db) }],
                ..self.clone()
            },
        }
    }

    pub fn orbit(&self) -> Result<OrbitGeometry> {
        Ok(OrbitGeometry::new(self.r0_m, self.velocity_mps)?)
    }

    pub fn ofdm(&self) -> Result<OfdmConfig> {
        Ok(OfdmConfig::new(self.subcarriers, self.cp_len, self.spacing_hz, self.symbols)?)
    }

    pub fn geometry(&self) -> Result<SacGeometry> {
        let orbit = self.orbit()?;
        let ofdm = self.ofdm()?;
        let window = AcquisitionWindow::new(&orbit, ofdm.symbols, ofdm.symbol_duration_s())?;
        Ok(SacGeometry::new(orbit, CarrierConfig::new(self.carrier_hz)?, window))
    }

    pub fn budget(&self) -> Result<LinkBudget> {
        let path_loss = match self.path_loss_db {
            Some(v) => v,
            None => free_space_path_loss_db(self.r0_m, SPEED_OF_LIGHT / self.carrier_hz),
        };
        Ok(LinkBudget {
            tx_gain_dbi: self.tx_gain_dbi,
            rx_gain_dbi: self.rx_gain_dbi,
            path_loss_db: path_loss,
            atmospheric_loss_db: self.atmospheric_loss_db,
            scintillation_loss_db: self.scintillation_loss_db,
            noise_figure_db: self.noise_figure_db,
            temperature_k: self.temperature_k,
        })
    }

    /// Pilot comb of UE `ue_id`. `frame_seed` only matters with per-frame
    /// scrambling.
    pub fn pilots(&self, ue_id: u32, frame_seed: u64) -> Result<PilotLayout> {
        let seed = match self.pilot_scrambling {
            PilotScrambling::Fixed => 0x5AC0_0000 + u64::from(ue_id),
            PilotScrambling::PerFrame => frame_seed,
        };
        Ok(PilotLayout::comb(self.subcarriers, self.pilot_spacing, self.pilot_offset, seed)?)
    }
}
