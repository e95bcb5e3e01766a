//! Bit-granular writer/reader. Bit `n` of the stream lives in byte `n / 8`
//! at position `n % 8` (LSB first); multi-bit fields are written MSB first.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        for k in (0..width).rev() {
            self.push((value >> k) & 1 == 1);
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_bits(b as u64, 8);
        }
    }

    /// Elias gamma code of `n >= 1`.
    pub fn write_gamma(&mut self, n: u64) {
        assert!(n >= 1, "gamma code is defined for n >= 1");
        let width = 64 - n.leading_zeros() as usize;
        self.write_bits(0, width - 1);
        self.write_bits(n, width);
    }

    pub fn finish(self) -> (Vec<u8>, usize) {
        (self.bytes, self.len)
    }
}

#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    len: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return Err(Error::Malformed(format!(
                "bit length {len} exceeds {} bytes",
                bytes.len()
            )));
        }
        Ok(Self { bytes, pos: 0, len })
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.len {
            return Err(Error::Malformed("unexpected end of codeword".into()));
        }
        let bit = self.bytes[self.pos / 8] >> (self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: usize) -> Result<u64> {
        assert!(width <= 64);
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        if n.saturating_mul(8) > self.remaining() {
            return Err(Error::Malformed(format!("{n} bytes requested past the end")));
        }
        (0..n).map(|_| Ok(self.read_bits(8)? as u8)).collect()
    }

    pub fn read_gamma(&mut self) -> Result<u64> {
        let mut zeros = 0;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(Error::Malformed("gamma prefix too long".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) | rest)
    }
}

/// Bits used by the gamma code of `n >= 1`.
pub fn gamma_len(n: u64) -> usize {
    assert!(n >= 1);
    2 * (63 - n.leading_zeros() as usize) + 1
}
