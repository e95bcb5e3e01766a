//! Seeded, substream-addressable randomness.
//!
//! Every random draw in the crate comes from a [`LabRng`] addressed by a
//! 64-bit seed and a 64-bit stream id. The generator is ChaCha8; ChaCha stream
//! ids select disjoint keystreams, so distinct `(seed, stream)` pairs never
//! overlap and the output is identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream-id namespaces. The tag occupies the top 24 bits of the stream id,
/// the index the low 40.
pub mod tag {
    pub const BLOCK: u32 = 1;
    pub const HASH_DRAW: u32 = 2;
    pub const SIGN_FLIP: u32 = 3;
    pub const SPLIT: u32 = 4;
    pub const MASK: u32 = 5;
    pub const SILS_HASH: u32 = 6;
    pub const EXPERIMENT: u32 = 7;
    pub const SYNTHETIC: u32 = 8;
    pub const TRAINING: u32 = 9;
    pub const TUPLE: u32 = 10;
}

const INDEX_BITS: u32 = 40;

pub fn stream_id(tag: u32, index: u64) -> u64 {
    assert!(tag < (1 << 24), "stream tag exceeds 24 bits");
    assert!(index < (1 << INDEX_BITS), "stream index exceeds 40 bits");
    ((tag as u64) << INDEX_BITS) | index
}

#[derive(Clone, Debug)]
pub struct LabRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl LabRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn for_stream(seed: u64, tag: u32, index: u64) -> Self {
        Self::new(seed, stream_id(tag, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Draws a fresh 64-bit seed for a child computation.
    pub fn child_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RngCore for LabRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Parses a seed given as decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|e| Error::invalid("seed", format!("{t:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = LabRng::new(42, 3);
        let mut b = LabRng::new(42, 3);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = LabRng::new(42, 3);
        let mut b = LabRng::new(42, 4);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn known_output_is_pinned() {
        // Guards against an accidental change of generator or seeding scheme.
        let mut r = LabRng::new(0, 0);
        let first = r.next_u64();
        let mut again = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(first, again.next_u64());
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed("17").unwrap(), 17);
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("0XFF").unwrap(), 255);
        assert!(parse_seed("zz").is_err());
        assert!(parse_seed("-1").is_err());
    }

    #[test]
    fn stream_ids_pack_tag_and_index() {
        assert_eq!(stream_id(1, 5), (1u64 << 40) | 5);
        assert_ne!(stream_id(1, 0), stream_id(2, 0));
    }
}
