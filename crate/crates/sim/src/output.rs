//! CSV and manifest writers.
//!
//! `bler.csv` has one row per (point, UE) plus a `mean` row per point.
//! `azimuth_profile.csv` holds one noise-on profile snapshot.
//! `manifest.json` echoes the resolved config; its only time-dependent
//! field is `generated_at`.

use std::fs::File;
use std::path::{Path, PathBuf};

use sac_core::receiver::AzimuthProfile;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ScenarioConfig};
use crate::error::{Result, SimError};
use crate::sweep::{BlerCurve, BlerPoint};

pub const BLER_CSV: &str = "bler.csv";
pub const PROFILE_CSV: &str = "azimuth_profile.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerRow {
    pub ptx_dbm: f64,
    /// UE index, or `mean`.
    pub ue_id: String,
    pub trials: usize,
    pub errors: usize,
    pub bler: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub doa_rmse_m: f64,
}

impl From<&BlerPoint> for BlerRow {
    fn from(p: &BlerPoint) -> Self {
        Self {
            ptx_dbm: p.ptx_dbm,
            ue_id: p.ue_id.map_or("mean".into(), |u| u.to_string()),
            trials: p.trials,
            errors: p.errors,
            bler: p.bler,
            ci_lo: p.ci_lo,
            ci_hi: p.ci_hi,
            doa_rmse_m: p.doa_rmse_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub bin: f64,
    pub doppler_hz: f64,
    pub angle_deg: f64,
    pub cross_range_m: f64,
    pub norm_db: f64,
}

pub fn profile_rows(profile: &AzimuthProfile) -> Vec<ProfileRow> {
    let db = profile.normalized_db();
    (0..profile.len())
        .map(|i| ProfileRow {
            bin: profile.bins[i],
            doppler_hz: profile.doppler_hz[i],
            angle_deg: profile.angle_rad[i].to_degrees(),
            cross_range_m: profile.cross_range_m[i],
            norm_db: db[i],
        })
        .collect()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
    move |source| SimError::Csv { path: path.to_path_buf(), source }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| SimError::Io { path: path.to_path_buf(), source })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

pub fn write_bler(path: &Path, curve: &BlerCurve) -> Result<()> {
    write_csv(path, &curve.points.iter().map(BlerRow::from).collect::<Vec<_>>())
}

pub fn write_profile(path: &Path, profile: &AzimuthProfile) -> Result<()> {
    write_csv(path, &profile_rows(profile))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Config as given.
    pub config: serde_json::Map<String, serde_json::Value>,
    /// Config actually simulated.
    pub effective_config: serde_json::Map<String, serde_json::Value>,
    pub baseline: Option<String>,
    pub k_info: usize,
    pub code_rate: f64,
    pub grid_points: usize,
    pub measured_threshold_dbm: Option<f64>,
    /// Link-budget SNR after combining at the measured threshold.
    pub predicted_snr_at_threshold_db: Option<f64>,
    /// Link-budget SNR after combining at the profile power.
    pub predicted_snr_at_profile_db: f64,
    pub profile_ptx_dbm: f64,
    pub generated_at: String,
}

pub const NOSAC_BASELINE: &str = "one OFDM symbol (M = 1) from a single UE at x = 0 with the \
    satellite at x = 0; same numerology, pilots, code and link budget as the SAC run; \
    no azimuth compression gain; grid estimation with the UE position taken as known";

fn echo(cfg: &ScenarioConfig) -> serde_json::Map<String, serde_json::Value> {
    cfg.entries().into_iter().map(|(k, v)| (k, serde_json::Value::String(v))).collect()
}

impl Manifest {
    pub fn new(
        requested: &ScenarioConfig,
        effective: &ScenarioConfig,
        curve: Option<&BlerCurve>,
        k_info: usize,
        code_rate: f64,
        predicted_snr_db: impl Fn(f64) -> f64,
    ) -> Self {
        let threshold = curve.and_then(BlerCurve::threshold_dbm);
        let generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default();
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: effective.seed,
            config: echo(requested),
            effective_config: echo(effective),
            baseline: (effective.mode == Mode::NoSac).then(|| NOSAC_BASELINE.to_string()),
            k_info,
            code_rate,
            grid_points: effective.sweep_ptx_dbm.len(),
            measured_threshold_dbm: threshold,
            predicted_snr_at_threshold_db: threshold.map(&predicted_snr_db),
            predicted_snr_at_profile_db: predicted_snr_db(effective.profile_ptx_dbm),
            profile_ptx_dbm: effective.profile_ptx_dbm,
            generated_at,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
        serde_json::to_writer_pretty(f, self).map_err(|source| SimError::Json { path: path.to_path_buf(), source })
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.to_path_buf(), source })?;
    Ok(dir.to_path_buf())
}
