//! OFDM framing: Gray QPSK, a regular pilot comb, repeated-symbol frames,
//! unitary DFTs with a cyclic prefix, and soft demapping.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Numerology of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmConfig {
    /// Subcarriers `N`.
    pub subcarriers: usize,
    /// Cyclic prefix length `N_CP` (samples).
    pub cp_len: usize,
    /// Subcarrier spacing `delta f` (Hz).
    pub spacing_hz: f64,
    /// Symbols per frame `M`.
    pub symbols: usize,
}

impl OfdmConfig {
    pub fn new(subcarriers: usize, cp_len: usize, spacing_hz: f64, symbols: usize) -> Result<Self> {
        if subcarriers < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 subcarriers, got {subcarriers}")));
        }
        if cp_len >= subcarriers {
            return Err(Error::InvalidConfig(format!(
                "CP length {cp_len} must be shorter than the symbol ({subcarriers})"
            )));
        }
        if !(spacing_hz > 0.0 && spacing_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!("subcarrier spacing must be > 0, got {spacing_hz}")));
        }
        if symbols == 0 {
            return Err(Error::InvalidConfig("frame needs at least one symbol".into()));
        }
        Ok(Self { subcarriers, cp_len, spacing_hz, symbols })
    }

    /// Normal CP scaled from the 144/2048 ratio of the NR reference numerology.
    pub fn with_normal_cp(subcarriers: usize, spacing_hz: f64, symbols: usize) -> Result<Self> {
        Self::new(subcarriers, normal_cp_len(subcarriers), spacing_hz, symbols)
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.subcarriers as f64 * self.spacing_hz
    }

    pub fn useful_duration_s(&self) -> f64 {
        1.0 / self.spacing_hz
    }

    pub fn cp_duration_s(&self) -> f64 {
        self.cp_len as f64 / self.bandwidth_hz()
    }

    /// `T = (N + N_CP) / B`.
    pub fn symbol_duration_s(&self) -> f64 {
        self.samples_per_symbol() as f64 / self.bandwidth_hz()
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.symbols as f64 * self.symbol_duration_s()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.subcarriers + self.cp_len
    }

    pub fn frame_samples(&self) -> usize {
        self.symbols * self.samples_per_symbol()
    }

    /// Same numerology with a different repetition count.
    pub fn with_symbols(&self, symbols: usize) -> Result<Self> {
        Self::new(self.subcarriers, self.cp_len, self.spacing_hz, symbols)
    }
}

pub fn normal_cp_len(subcarriers: usize) -> usize {
    subcarriers * 144 / 2048
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
}

/// `N x M` complex matrix, one OFDM symbol per column (column-major storage).
#[derive(Clone, PartialEq)]
pub struct FrameGrid {
    rows: usize,
    cols: usize,
    domain: Domain,
    data: Vec<Complex64>,
}

impl fmt::Debug for FrameGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameGrid")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl FrameGrid {
    pub fn zeros(rows: usize, cols: usize, domain: Domain) -> Self {
        Self { rows, cols, domain, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_columns(rows: usize, cols: usize, domain: Domain, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { what: "frame grid", expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, domain, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn column_mut(&mut self, col: usize) -> &mut [Complex64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> std::slice::Chunks<'_, Complex64> {
        self.data.chunks(self.rows)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn power(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Unitary (`1/sqrt(N)`) forward and inverse DFT of one fixed length.
#[derive(Clone)]
pub struct UnitaryDft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms every consecutive block of `len` samples in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.len, 0);
        self.forward.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.len, 0);
        self.inverse.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }
}

/// Gray-mapped, unit-power QPSK: bit pair `(b0, b1)` maps to
/// `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn map_bits(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::LengthMismatch { what: "QPSK bit stream", expected: bits.len() + 1, actual: bits.len() });
    }
    Ok(bits.chunks_exact(2).map(|b| qpsk(b[0], b[1])).collect())
}

fn qpsk(b0: u8, b1: u8) -> Complex64 {
    let level = |b: u8| if b & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(level(b0), level(b1))
}

/// Hard QPSK decisions.
pub fn demap_hard(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|z| [u8::from(z.re < 0.0), u8::from(z.im < 0.0)])
        .collect()
}

/// Exact bit LLRs (`ln P(0)/P(1)`) of Gray QPSK under complex AWGN of
/// variance `noise_var` per symbol.
pub fn llr_demap(symbols: &[Complex64], noise_var: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::SQRT_2 / noise_var;
    symbols.iter().flat_map(|z| [scale * z.re, scale * z.im]).collect()
}

/// [`llr_demap`] with a separate noise variance per symbol.
pub fn llr_demap_weighted(symbols: &[Complex64], noise_vars: &[f64]) -> Result<Vec<f64>> {
    if symbols.len() != noise_vars.len() {
        return Err(Error::LengthMismatch { what: "noise variances", expected: symbols.len(), actual: noise_vars.len() });
    }
    Ok(symbols
        .iter()
        .zip(noise_vars)
        .flat_map(|(z, &var)| {
            let scale = 2.0 * std::f64::consts::SQRT_2 / var;
            [scale * z.re, scale * z.im]
        })
        .collect())
}

/// Regular pilot comb with known pseudo-random QPSK values.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    subcarriers: usize,
    spacing: usize,
    indices: Vec<usize>,
    data_indices: Vec<usize>,
    symbols: Vec<Complex64>,
}

impl PilotLayout {
    /// Pilots every `spacing` subcarriers starting at `offset`; values drawn
    /// from `seed` (normally derived from the UE identifier).
    pub fn comb(subcarriers: usize, spacing: usize, offset: usize, seed: u64) -> Result<Self> {
        if spacing < 2 || offset >= spacing || spacing > subcarriers {
            return Err(Error::InvalidConfig(format!(
                "pilot comb spacing {spacing} / offset {offset} invalid for {subcarriers} subcarriers"
            )));
        }
        let indices: Vec<usize> = (offset..subcarriers).step_by(spacing).collect();
        let data_indices = (0..subcarriers).filter(|k| (k + spacing - offset) % spacing != 0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = indices.iter().map(|_| qpsk(rng.random(), rng.random())).collect();
        Ok(Self { subcarriers, spacing, indices, data_indices, symbols })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }

    pub fn pilot_fraction(&self) -> f64 {
        self.indices.len() as f64 / self.subcarriers as f64
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data_indices(&self) -> &[usize] {
        &self.data_indices
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn data_len(&self) -> usize {
        self.data_indices.len()
    }

    /// One frequency-domain OFDM symbol with pilots and data interleaved.
    pub fn assemble(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        if data.len() != self.data_len() {
            return Err(Error::LengthMismatch { what: "data symbols", expected: self.data_len(), actual: data.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.subcarriers];
        for (&k, &p) in self.indices.iter().zip(&self.symbols) {
            out[k] = p;
        }
        for (&k, &d) in self.data_indices.iter().zip(data) {
            out[k] = d;
        }
        Ok(out)
    }

    /// Pulls the data subcarriers back out of a symbol.
    pub fn extract_data<T: Copy>(&self, symbol: &[T]) -> Vec<T> {
        self.data_indices.iter().map(|&k| symbol[k]).collect()
    }
}

/// Frequency-domain frame repeating the same symbol in all `M` columns.
pub fn build_frame(data: &[Complex64], pilots: &PilotLayout, cfg: &OfdmConfig) -> Result<FrameGrid> {
    if pilots.subcarriers() != cfg.subcarriers {
        return Err(Error::LengthMismatch { what: "pilot layout", expected: cfg.subcarriers, actual: pilots.subcarriers() });
    }
    let symbol = pilots.assemble(data)?;
    let mut grid = FrameGrid::zeros(cfg.subcarriers, cfg.symbols, Domain::Frequency);
    for m in 0..cfg.symbols {
        grid.column_mut(m).copy_from_slice(&symbol);
    }
    Ok(grid)
}

/// Modulator/demodulator bound to one numerology.
#[derive(Debug, Clone)]
pub struct OfdmModem {
    cfg: OfdmConfig,
    dft: UnitaryDft,
}

impl OfdmModem {
    pub fn new(cfg: OfdmConfig) -> Self {
        Self { cfg, dft: UnitaryDft::new(cfg.subcarriers) }
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn dft(&self) -> &UnitaryDft {
        &self.dft
    }

    /// IDFT of every column, CP prepended, serialized.
    pub fn modulate(&self, grid: &FrameGrid) -> Result<Vec<Complex64>> {
        let n = self.cfg.subcarriers;
        if grid.domain() != Domain::Frequency || grid.rows() != n {
            return Err(Error::InvalidConfig("modulator expects an N-row frequency-domain grid".into()));
        }
        let mut time = grid.as_slice().to_vec();
        self.dft.inverse(&mut time);
        let mut out = Vec::with_capacity(grid.cols() * self.cfg.samples_per_symbol());
        for col in time.chunks_exact(n) {
            out.extend_from_slice(&col[n - self.cfg.cp_len..]);
            out.extend_from_slice(col);
        }
        Ok(out)
    }

    /// Drops the CP of each symbol and returns the `N x M` time-domain grid.
    pub fn strip_cp(&self, stream: &[Complex64]) -> Result<FrameGrid> {
        let sps = self.cfg.samples_per_symbol();
        if stream.len() % sps != 0 || stream.is_empty() {
            return Err(Error::LengthMismatch { what: "sample stream", expected: self.cfg.frame_samples(), actual: stream.len() });
        }
        let cols = stream.len() / sps;
        let mut data = Vec::with_capacity(cols * self.cfg.subcarriers);
        for sym in stream.chunks_exact(sps) {
            data.extend_from_slice(&sym[self.cfg.cp_len..]);
        }
        FrameGrid::from_columns(self.cfg.subcarriers, cols, Domain::Time, data)
    }

    /// Unitary forward DFT of one CP-free column.
    pub fn demod_column(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.cfg.subcarriers {
            return Err(Error::LengthMismatch { what: "OFDM column", expected: self.cfg.subcarriers, actual: samples.len() });
        }
        let mut out = samples.to_vec();
        self.dft.forward(&mut out);
        Ok(out)
    }

    /// Demodulates a whole time-domain grid.
    pub fn demodulate(&self, grid: &FrameGrid) -> Result<FrameGrid> {
        if grid.domain() != Domain::Time || grid.rows() != self.cfg.subcarriers {
            return Err(Error::InvalidConfig("demodulator expects an N-row time-domain grid".into()));
        }
        let mut data = grid.as_slice().to_vec();
        self.dft.forward(&mut data);
        FrameGrid::from_columns(grid.rows(), grid.cols(), Domain::Frequency, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn gray_map_convention() {
        let s = map_bits(&[0, 0, 1, 0, 0, 1, 1, 1]).unwrap();
        let a = FRAC_1_SQRT_2;
        assert_eq!(s, vec![c(a, a), c(-a, a), c(a, -a), c(-a, -a)]);
        assert!(map_bits(&[0, 1, 1]).is_err());
    }

    #[test]
    fn mapped_power_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = map_bits(&random_bits(&mut rng, 20_000)).unwrap();
        let p = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_demap_inverts_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bits = random_bits(&mut rng, 600);
        assert_eq!(demap_hard(&map_bits(&bits).unwrap()), bits);
    }

    #[test]
    fn llr_closed_form() {
        let a = FRAC_1_SQRT_2;
        let l = llr_demap(&[c(a, a)], 1.0);
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[1] - 2.0).abs() < 1e-12);
        let l2 = llr_demap(&[c(0.3, -0.2)], 2.0);
        let l1 = llr_demap(&[c(0.3, -0.2)], 1.0);
        assert!((l2[0] - l1[0] / 2.0).abs() < 1e-12 && (l2[1] - l1[1] / 2.0).abs() < 1e-12);
    }

    #[test]
    fn llr_sign_matches_hard_decision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bits = random_bits(&mut rng, 400);
        let noisy: Vec<Complex64> = map_bits(&bits)
            .unwrap()
            .into_iter()
            .map(|z| z + 0.05 * c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let hard = demap_hard(&noisy);
        for (l, b) in llr_demap(&noisy, 0.01).iter().zip(&hard) {
            assert_eq!(u8::from(*l < 0.0), *b);
        }
        assert_eq!(hard, bits);
    }

    #[test]
    fn pilot_comb_layout() {
        let p = PilotLayout::comb(300, 4, 0, 7).unwrap();
        assert_eq!(p.indices().len(), 75);
        assert_eq!(p.data_len(), 225);
        assert_eq!(p.indices()[0], 0);
        assert!(p.indices().windows(2).all(|w| w[1] - w[0] == 4));
        assert!((p.pilot_fraction() - 0.25).abs() < 1e-12);
        assert!(p.symbols().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_eq!(p, PilotLayout::comb(300, 4, 0, 7).unwrap());
        assert_ne!(p.symbols(), PilotLayout::comb(300, 4, 0, 8).unwrap().symbols());
        assert!(PilotLayout::comb(300, 4, 4, 0).is_err());
    }

    #[test]
    fn frame_columns_repeat() {
        let cfg = OfdmConfig::new(300, 21, 15e3, 93).unwrap();
        let pilots = PilotLayout::comb(300, 4, 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = map_bits(&random_bits(&mut rng, 450)).unwrap();
        let grid = build_frame(&data, &pilots, &cfg).unwrap();
        for m in 1..93 {
            assert_eq!(grid.column(m), grid.column(0));
        }
        assert!((grid.power() - 93.0 * 300.0).abs() < 1e-9);
        assert!(build_frame(&data[1..], &pilots, &cfg).is_err());
    }

    #[test]
    fn normal_cp_of_reference_numerologies() {
        assert_eq!(normal_cp_len(300), 21);
        assert_eq!(normal_cp_len(132), 9);
        let cfg = OfdmConfig::with_normal_cp(300, 15e3, 93).unwrap();
        assert!((cfg.symbol_duration_s() - 71.333e-6).abs() < 1e-9);
        assert!((cfg.bandwidth_hz() - 4.5e6).abs() < 1e-6);
        assert!((cfg.symbol_duration_s() - (cfg.useful_duration_s() + cfg.cp_duration_s())).abs() < 1e-15);
    }

    #[test]
    fn single_subcarrier_is_flat_in_time() {
        let cfg = OfdmConfig::new(64, 4, 15e3, 1).unwrap();
        let modem = OfdmModem::new(cfg);
        let mut grid = FrameGrid::zeros(64, 1, Domain::Frequency);
        grid.column_mut(0)[0] = c(1.0, 0.0);
        let s = modem.modulate(&grid).unwrap();
        assert_eq!(s.len(), 68);
        for z in s {
            assert!((z - c(1.0 / 8.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_prefix_copies_tail() {
        let cfg = OfdmConfig::new(32, 5, 15e3, 3).unwrap();
        let modem = OfdmModem::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Complex64> =
            (0..96).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let grid = FrameGrid::from_columns(32, 3, Domain::Frequency, data).unwrap();
        let s = modem.modulate(&grid).unwrap();
        for sym in s.chunks_exact(37) {
            assert_eq!(&sym[..5], &sym[32..]);
        }
    }

    #[test]
    fn single_tone_maps_to_one_bin() {
        let cfg = OfdmConfig::new(16, 2, 15e3, 1).unwrap();
        let modem = OfdmModem::new(cfg);
        let k = 5;
        let tone: Vec<Complex64> = (0..16)
            .map(|n| Complex64::from_polar(1.0, std::f64::consts::TAU * (k * n) as f64 / 16.0))
            .collect();
        let out = modem.demod_column(&tone).unwrap();
        for (i, z) in out.iter().enumerate() {
            if i == k {
                assert!((z.norm() - 4.0).abs() < 1e-12);
            } else {
                assert!(z.norm() < 1e-12);
            }
        }
        assert!(modem.demod_column(&tone[1..]).is_err());
    }

    #[test]
    fn demodulation_preserves_noise_variance() {
        let cfg = OfdmConfig::new(64, 4, 15e3, 1).unwrap();
        let modem = OfdmModem::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut pin, mut pout) = (0.0, 0.0);
        for _ in 0..10_000 {
            let x: Vec<Complex64> = (0..64)
                .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * FRAC_1_SQRT_2)
                .collect();
            pin += x.iter().map(|z| z.norm_sqr()).sum::<f64>();
            pout += modem.demod_column(&x).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let n = 640_000.0;
        assert!((pin / n - 1.0).abs() < 0.01);
        assert!((pout / pin - 1.0).abs() < 1e-9);
    }
}
