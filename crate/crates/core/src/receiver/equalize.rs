//! Per-subcarrier channel estimation and zero-forcing.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::ofdm::PilotLayout;
use crate::{Error, Result};

/// Pilots weaker than this fraction of the median magnitude are rejected.
pub const UNRELIABLE_PILOT_RATIO: f64 = 1e-3;

/// Output of the ZF stage for one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedSymbols {
    /// `R_k = G_k Y_k` on all `N` subcarriers.
    pub symbols: Vec<Complex64>,
    /// ZF coefficients `G_k`.
    pub equalizer: Vec<Complex64>,
    /// Noise variance of each `R_k`.
    pub noise_var: Vec<f64>,
}

/// Multiplies sample `n` by `exp(-j 2 pi f_hat n / B)`.
pub fn doppler_correct(samples: &mut [Complex64], f_hat: f64, bandwidth_hz: f64) {
    let step = -TAU * f_hat / bandwidth_hz;
    for (n, z) in samples.iter_mut().enumerate() {
        *z *= Complex64::from_polar(1.0, step * n as f64);
    }
}

/// Least-squares pilot estimates interpolated to every subcarrier; returns
/// the ZF coefficients `1 / H_k`.
///
/// The common phase slope across pilots (the bulk-delay ramp) is measured
/// from adjacent pilot products and removed before linear interpolation of
/// the real and imaginary parts, then put back. Subcarriers outside the
/// pilot span take the nearest pilot's de-ramped value.
pub fn estimate_channel(freq: &[Complex64], pilots: &PilotLayout) -> Result<Vec<Complex64>> {
    let n = pilots.subcarriers();
    if freq.len() != n {
        return Err(Error::LengthMismatch { what: "frequency-domain symbol", expected: n, actual: freq.len() });
    }
    let idx = pilots.indices();
    let h: Vec<Complex64> = idx.iter().zip(pilots.symbols()).map(|(&k, &x)| freq[k] / x).collect();

    let mut mags: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    for (&k, z) in idx.iter().zip(&h) {
        if !(z.norm() >= UNRELIABLE_PILOT_RATIO * median) || median == 0.0 {
            return Err(Error::UnreliablePilot { subcarrier: k, magnitude: z.norm(), median });
        }
    }

    let slope = if h.len() > 1 {
        let acc: Complex64 = h.windows(2).map(|w| w[1] * w[0].conj()).sum();
        acc.arg() / pilots.spacing() as f64
    } else {
        0.0
    };
    let ramp = |k: usize| Complex64::from_polar(1.0, slope * k as f64);
    let flat: Vec<Complex64> = idx.iter().zip(&h).map(|(&k, &z)| z * ramp(k).conj()).collect();

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let value = if k <= idx[0] {
            flat[0]
        } else if k >= idx[idx.len() - 1] {
            flat[flat.len() - 1]
        } else {
            while idx[seg + 1] < k {
                seg += 1;
            }
            let (k0, k1) = (idx[seg], idx[seg + 1]);
            let w = (k - k0) as f64 / (k1 - k0) as f64;
            flat[seg] * (1.0 - w) + flat[seg + 1] * w
        };
        out.push((value * ramp(k)).inv());
    }
    Ok(out)
}

/// `R_k = G_k Y_k`; the noise variance of each output is `noise_var |G_k|^2`.
pub fn zf_equalize(freq: &[Complex64], equalizer: &[Complex64], noise_var: f64) -> Result<EqualizedSymbols> {
    if freq.len() != equalizer.len() {
        return Err(Error::LengthMismatch { what: "ZF coefficients", expected: freq.len(), actual: equalizer.len() });
    }
    Ok(EqualizedSymbols {
        symbols: freq.iter().zip(equalizer).map(|(y, g)| y * g).collect(),
        equalizer: equalizer.to_vec(),
        noise_var: equalizer.iter().map(|g| noise_var * g.norm_sqr()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> PilotLayout {
        PilotLayout::comb(300, 4, 0, 7).unwrap()
    }

    fn received(pilots: &PilotLayout, h: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        let data = vec![Complex64::new(0.6, -0.8); pilots.data_len()];
        let x = pilots.assemble(&data).unwrap();
        x.iter().enumerate().map(|(k, s)| s * h(k)).collect()
    }

    #[test]
    fn flat_unit_channel() {
        let p = layout();
        let g = estimate_channel(&received(&p, |_| Complex64::new(1.0, 0.0)), &p).unwrap();
        assert!(g.iter().all(|z| (z - 1.0).norm() < 1e-12));
    }

    #[test]
    fn delay_ramp_is_tracked() {
        // Bulk delay of a UE at the aperture centre, 600 km at 4.5 MHz.
        let d = 600e3 * 4.5e6 / crate::units::SPEED_OF_LIGHT;
        let p = layout();
        let h = |k: usize| Complex64::from_polar(3e-4, -TAU * k as f64 * d / 300.0 + 0.4);
        let g = estimate_channel(&received(&p, h), &p).unwrap();
        for (k, gk) in g.iter().enumerate() {
            let e = gk * h(k);
            assert!(20.0 * e.norm().log10() < 0.1, "k={k}");
            assert!(e.arg().abs() < 0.05, "k={k}");
        }
    }

    #[test]
    fn weak_pilot_is_rejected() {
        let p = layout();
        let mut y = received(&p, |_| Complex64::new(1.0, 0.0));
        y[8] *= 1e-5;
        assert!(matches!(estimate_channel(&y, &p), Err(Error::UnreliablePilot { subcarrier: 8, .. })));
        assert!(estimate_channel(&y[..10], &p).is_err());
    }

    #[test]
    fn zf_identity_and_variance() {
        let y = vec![Complex64::new(0.3, 0.1); 4];
        let g = vec![Complex64::new(1.0, 0.0); 4];
        let eq = zf_equalize(&y, &g, 0.5).unwrap();
        assert_eq!(eq.symbols, y);
        assert_eq!(eq.noise_var, vec![0.5; 4]);
        let g2 = vec![Complex64::new(0.0, 2.0); 4];
        assert_eq!(zf_equalize(&y, &g2, 0.5).unwrap().noise_var, vec![2.0; 4]);
        assert!(zf_equalize(&y, &g[..3], 0.5).is_err());
    }

    #[test]
    fn doppler_correction_is_unit_modulus() {
        let mut x = vec![Complex64::new(1.0, 1.0); 16];
        doppler_correct(&mut x, 0.0, 4.5e6);
        assert!(x.iter().all(|z| *z == Complex64::new(1.0, 1.0)));
        doppler_correct(&mut x, 1234.5, 4.5e6);
        assert!(x.iter().all(|z| (z.norm_sqr() - 2.0).abs() < 1e-12));
    }
}
