//! Canonical little-endian parameter bytes for registry decoders.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct ParamWriter {
    out: Vec<u8>,
}

impl ParamWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(mut self, v: u8) -> Self {
        self.out.push(v);
        self
    }

    pub fn u32(mut self, v: u32) -> Self {
        self.out.extend(v.to_le_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.out.extend(v.to_le_bytes());
        self
    }

    /// `u32` length prefix then the bytes.
    pub fn bytes(mut self, v: &[u8]) -> Self {
        self.out.extend((v.len() as u32).to_le_bytes());
        self.out.extend(v);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.out
    }
}

#[derive(Clone, Debug)]
pub struct ParamReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ParamReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Malformed("decoder parameters truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed(format!(
                "{} trailing parameter bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
