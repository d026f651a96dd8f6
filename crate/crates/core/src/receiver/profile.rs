//! Doppler-domain azimuth profile and multi-UE peak picking.

use crate::geometry::SacGeometry;
use crate::{Error, Result};

/// Relative magnitude difference below which two peaks count as tied.
pub const TIE_TOLERANCE: f64 = 1e-4;

/// Column-norm profile of the symbol-axis DFT of a compressed frame.
///
/// Samples are sorted by Doppler bin in `[-M/2, M/2)`. With `oversample = P`
/// the transform was zero-padded to `P M` points, so consecutive samples sit
/// `1/P` of a bin apart.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthProfile {
    pub oversample: usize,
    /// Fractional Doppler bin `l`.
    pub bins: Vec<f64>,
    pub norms: Vec<f64>,
    pub doppler_hz: Vec<f64>,
    pub angle_rad: Vec<f64>,
    pub cross_range_m: Vec<f64>,
    geometry: SacGeometry,
}

/// One detected UE, ranked by peak magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeDetection {
    pub ue_index: usize,
    /// Doppler bin, fractional when interpolated.
    pub bin: f64,
    pub f_hat: f64,
    pub theta_hat: f64,
    pub x_hat: f64,
    pub peak_magnitude: f64,
}

impl UeDetection {
    pub(super) fn from_bin(ue_index: usize, bin: f64, peak_magnitude: f64, geometry: &SacGeometry) -> Self {
        let f_hat = bin / geometry.window.frame_duration_s;
        let theta_hat = geometry.azimuth_from_doppler(f_hat);
        Self { ue_index, bin, f_hat, theta_hat, x_hat: theta_hat * geometry.orbit.height_m, peak_magnitude }
    }

    /// Genie detection at the true position, for ideal-DoA runs and tests.
    pub fn from_truth(ue_index: usize, cross_range_m: f64, geometry: &SacGeometry) -> Result<Self> {
        geometry.check_small_angle(cross_range_m)?;
        let f = geometry.doppler_after_compression(&geometry.ue(cross_range_m))?;
        Ok(Self::from_bin(ue_index, geometry.doppler_bin(f), f64::NAN, geometry))
    }
}

impl AzimuthProfile {
    /// Builds the axes for norms given in natural DFT order (`k = 0..P M`).
    pub(super) fn from_natural_order(natural: Vec<f64>, oversample: usize, geometry: SacGeometry) -> Self {
        let m = geometry.window.symbols as f64;
        let p = oversample as f64;
        let mut pairs: Vec<(f64, f64)> = natural
            .into_iter()
            .enumerate()
            .map(|(k, norm)| {
                let u = k as f64 / p;
                (if u >= 0.5 * m { u - m } else { u }, norm)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let bins: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let norms = pairs.iter().map(|p| p.1).collect();
        let doppler_hz: Vec<f64> = bins.iter().map(|l| l / geometry.window.frame_duration_s).collect();
        let angle_rad: Vec<f64> = doppler_hz.iter().map(|&f| geometry.azimuth_from_doppler(f)).collect();
        let cross_range_m = angle_rad.iter().map(|a| a * geometry.orbit.height_m).collect();
        Self { oversample, bins, norms, doppler_hz, angle_rad, cross_range_m, geometry }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn geometry(&self) -> &SacGeometry {
        &self.geometry
    }

    /// Norms in dB relative to the global peak.
    pub fn normalized_db(&self) -> Vec<f64> {
        let peak = self.norms.iter().copied().fold(0.0, f64::max);
        self.norms.iter().map(|&v| 20.0 * (v / peak).log10()).collect()
    }

    /// Index of the sample closest to a fractional bin (circularly).
    pub fn index_of_bin(&self, bin: f64) -> usize {
        let m = self.geometry.window.symbols as f64;
        let p = self.oversample as f64;
        let k = (bin.rem_euclid(m) * p).round() as usize % self.len();
        // Natural index k maps to the sorted position by rotating half a period.
        let shift = self.bins.iter().position(|&b| b >= 0.0).unwrap_or(0);
        (k + shift) % self.len()
    }

    /// `K` strongest peaks.
    ///
    /// Local maxima are taken circularly; after each pick everything within
    /// one bin of it is cancelled (the two adjacent bins on the plain grid).
    /// Near-equal peaks go to the smaller `|l|`. An oversampled profile gets
    /// a parabolic refinement of each peak.
    pub fn detect(&self, expected: usize) -> Result<Vec<UeDetection>> {
        let len = self.len();
        if expected == 0 || expected > self.geometry.window.symbols {
            return Err(Error::InvalidConfig(format!("cannot detect {expected} UEs in {} bins", self.geometry.window.symbols)));
        }
        let v = &self.norms;
        let at = |i: isize| v[i.rem_euclid(len as isize) as usize];
        let mut candidates: Vec<usize> = (0..len)
            .filter(|&i| {
                let i = i as isize;
                at(i) >= at(i - 1).max(at(i + 1)) * (1.0 - TIE_TOLERANCE)
            })
            .collect();

        let p = self.oversample;
        let cancels = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            let d = d.min(len - d);
            if p == 1 { d <= 1 } else { d < p }
        };
        let mut picked: Vec<usize> = Vec::with_capacity(expected);
        while picked.len() < expected && !candidates.is_empty() {
            let best = candidates.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
            let tol = best.abs() * TIE_TOLERANCE;
            let &choice = candidates
                .iter()
                .filter(|&&i| v[i] >= best - tol)
                .min_by(|&&a, &&b| self.bins[a].abs().total_cmp(&self.bins[b].abs()).then(a.cmp(&b)))
                .expect("non-empty candidate list");
            picked.push(choice);
            candidates.retain(|&i| !cancels(i, choice));
        }
        if picked.len() < expected {
            return Err(Error::NotEnoughPeaks { found: picked.len(), expected });
        }

        Ok(picked
            .into_iter()
            .enumerate()
            .map(|(rank, i)| {
                let (bin, mag) = if p > 1 { self.refine(i) } else { (self.bins[i], v[i]) };
                UeDetection::from_bin(rank, bin, mag, &self.geometry)
            })
            .collect())
    }

    /// Interpolated location and height of the global maximum.
    pub fn strongest(&self) -> (f64, f64) {
        let i = (0..self.len()).max_by(|&a, &b| self.norms[a].total_cmp(&self.norms[b])).unwrap_or(0);
        if self.oversample > 1 { self.refine(i) } else { (self.bins[i], self.norms[i]) }
    }

    /// Parabolic vertex through the peak sample and its neighbours.
    fn refine(&self, i: usize) -> (f64, f64) {
        let len = self.len();
        let a = self.norms[(i + len - 1) % len];
        let b = self.norms[i];
        let c = self.norms[(i + 1) % len];
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return (self.bins[i], b);
        }
        let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        let m = self.geometry.window.symbols as f64;
        let bin = (self.bins[i] + delta / self.oversample as f64 + 0.5 * m).rem_euclid(m) - 0.5 * m;
        (bin, b - 0.25 * (a - c) * delta)
    }
}
