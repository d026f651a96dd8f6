//! CRC-aided polar code: Arikan kernel, GA-designed frozen set, shortening
//! from the mother length to the frame payload, and SCL decoding.

mod construction;
mod crc;
mod decoder;

pub use construction::{bit_channel_means, information_set, shortened_positions};
pub use crc::{Crc, CRC11_POLY};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarConfig {
    /// Information bits per block `K`.
    pub k_info: usize,
    /// CRC bits appended before encoding.
    pub k_crc: usize,
    /// Mother code length (power of two).
    pub n_mother: usize,
    /// Transmitted (rate-matched) length `E`.
    pub e: usize,
    pub list_size: usize,
    /// Es/N0 used for the Gaussian-approximation construction (dB).
    pub design_snr_db: f64,
}

impl PolarConfig {
    /// CRC-11, list 8, smallest fitting mother length, 0 dB design point.
    pub fn new(k_info: usize, e: usize) -> Result<Self> {
        let cfg = Self {
            k_info,
            k_crc: 11,
            n_mother: e.max(1).next_power_of_two(),
            e,
            list_size: 8,
            design_snr_db: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_info == 0 {
            return bad("polar code needs at least one information bit".into());
        }
        if !self.n_mother.is_power_of_two() || self.n_mother < 2 {
            return bad(format!("mother length {} is not a power of two", self.n_mother));
        }
        if self.e > self.n_mother {
            return bad(format!("E = {} exceeds the mother length {}", self.e, self.n_mother));
        }
        if self.k_info + self.k_crc > self.e {
            return bad(format!(
                "K + CRC = {} does not fit in E = {}",
                self.k_info + self.k_crc,
                self.e
            ));
        }
        if !matches!(self.k_crc, 0 | 11) {
            return bad(format!("unsupported CRC length {}", self.k_crc));
        }
        if self.list_size == 0 {
            return bad("list size must be >= 1".into());
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.k_info as f64 / self.e as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub info_bits: Vec<u8>,
    pub crc_ok: bool,
}

/// A constructed code, ready to encode and decode.
#[derive(Debug, Clone)]
pub struct PolarCode {
    cfg: PolarConfig,
    crc: Option<Crc>,
    /// Ascending bit-channel indices carrying info + CRC bits.
    info_set: Vec<usize>,
    frozen: Vec<bool>,
    /// Code-bit positions that are never transmitted.
    shortened: Vec<bool>,
}

impl PolarCode {
    pub fn new(cfg: PolarConfig) -> Result<Self> {
        cfg.validate()?;
        let shortened = shortened_positions(cfg.n_mother, cfg.e);
        let info_set = information_set(&shortened, cfg.k_info + cfg.k_crc, cfg.design_snr_db);
        let mut frozen = vec![true; cfg.n_mother];
        for &i in &info_set {
            frozen[i] = false;
        }
        let crc = (cfg.k_crc > 0).then(Crc::crc11);
        Ok(Self { cfg, crc, info_set, frozen, shortened })
    }

    pub fn config(&self) -> &PolarConfig {
        &self.cfg
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.cfg.k_info {
            return Err(Error::LengthMismatch {
                what: "polar information block",
                expected: self.cfg.k_info,
                actual: info_bits.len(),
            });
        }
        let mut payload = info_bits.iter().map(|b| b & 1).collect::<Vec<u8>>();
        if let Some(crc) = &self.crc {
            let parity = crc.parity_bits(&payload);
            payload.extend(parity);
        }
        let mut u = vec![0u8; self.cfg.n_mother];
        for (&i, &b) in self.info_set.iter().zip(&payload) {
            u[i] = b;
        }
        polar_transform(&mut u);
        debug_assert!(u.iter().zip(&self.shortened).all(|(&b, &s)| !s || b == 0));
        Ok(u.iter().zip(&self.shortened).filter(|(_, &s)| !s).map(|(&b, _)| b).collect())
    }

    /// CRC-aided SCL decoding of `E` channel LLRs (positive favours 0).
    pub fn decode(&self, llrs: &[f64]) -> Result<Decoded> {
        if llrs.len() != self.cfg.e {
            return Err(Error::LengthMismatch { what: "polar LLR block", expected: self.cfg.e, actual: llrs.len() });
        }
        if let Some(pos) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLlr(pos));
        }
        let mut sent = llrs.iter();
        let channel: Vec<f64> = self
            .shortened
            .iter()
            .map(|&s| if s { decoder::KNOWN_LLR } else { *sent.next().expect("E unshortened positions") })
            .collect();

        let paths = decoder::decode_list(&channel, &self.frozen, self.cfg.list_size);
        let mut best = None;
        for mut word in paths {
            polar_transform(&mut word);
            let payload: Vec<u8> = self.info_set.iter().map(|&i| word[i]).collect();
            let ok = self.crc.as_ref().is_none_or(|c| c.check(&payload));
            if ok {
                return Ok(Decoded { info_bits: payload[..self.cfg.k_info].to_vec(), crc_ok: true });
            }
            best.get_or_insert(payload);
        }
        let payload = best.expect("list decoder returns at least one path");
        Ok(Decoded { info_bits: payload[..self.cfg.k_info].to_vec(), crc_ok: self.crc.is_none() })
    }
}

/// In-place `x = u F^{(x)n}` over GF(2) with `F = [[1, 0], [1, 1]]`. The
/// transform is its own inverse.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in bits.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        h *= 2;
    }
}
