//! Bitwise CRC over `u8` bit vectors (one bit per byte, MSB first).

/// Generator of the NR CRC11: `D^11 + D^10 + D^9 + D^5 + 1`.
pub const CRC11_POLY: u32 = 0b1110_0010_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc {
    width: u32,
    poly: u32,
}

impl Crc {
    /// `poly` holds the generator without its leading `D^width` term.
    pub const fn new(width: u32, poly: u32) -> Self {
        Self { width, poly }
    }

    pub const fn crc11() -> Self {
        Self::new(11, CRC11_POLY & 0x7ff)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Remainder of `bits(D) * D^width` modulo the generator, zero initial state.
    pub fn remainder(&self, bits: &[u8]) -> u32 {
        let top = 1u32 << (self.width - 1);
        let mask = (1u32 << self.width) - 1;
        let mut reg = 0u32;
        for &b in bits {
            let feedback = ((reg & top) != 0) ^ (b & 1 == 1);
            reg = (reg << 1) & mask;
            if feedback {
                reg ^= self.poly;
            }
        }
        reg
    }

    pub fn parity_bits(&self, bits: &[u8]) -> Vec<u8> {
        let r = self.remainder(bits);
        (0..self.width).rev().map(|i| ((r >> i) & 1) as u8).collect()
    }

    /// `true` if `bits` ends with its own CRC.
    pub fn check(&self, bits: &[u8]) -> bool {
        bits.len() >= self.width() && self.remainder(bits) == 0
    }
}
