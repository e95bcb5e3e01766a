use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{Decoder, ParamReader, ParamWriter, Registry};
use crate::ensemble::Instance;
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::sils::{extract_sils, SilsSpec};
use crate::symmetry::LocalInput;

pub(crate) fn sils_spec_bytes(spec: &SilsSpec) -> Vec<u8> {
    serde_json::to_vec(spec).expect("sils spec serializes")
}

pub(crate) fn sils_spec_from(bytes: &[u8]) -> Result<SilsSpec> {
    let spec: SilsSpec = serde_json::from_slice(bytes)
        .map_err(|e| Error::Malformed(format!("sils spec: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn keyed_bit(seed: u64, i: usize, data: &[u8]) -> bool {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((i as u64).to_le_bytes());
    h.update(data);
    h.finalize()[0] & 1 == 1
}

#[derive(Clone, Debug, Default)]
pub struct ConstantZero;

impl ConstantZero {
    pub const NAME: &'static str = "constant-zero";

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        ParamReader::new(p).finish()?;
        Ok(Box::new(ConstantZero))
    }
}

impl Decoder for ConstantZero {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        Vec::new()
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        Ok(blocks.iter().map(|b| BitVector::zeros(b.m())).collect())
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// `x̂_i = g_i(z)`: a fixed seeded function of the sketch alone.
#[derive(Clone, Debug)]
pub struct SilsRule {
    pub sils: SilsSpec,
    pub seed: u64,
}

impl SilsRule {
    pub const NAME: &'static str = "sils-rule";

    pub fn new(sils: SilsSpec, seed: u64) -> Self {
        Self { sils, seed }
    }

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        let mut r = ParamReader::new(p);
        let seed = r.u64()?;
        let sils = sils_spec_from(r.bytes()?)?;
        r.finish()?;
        Ok(Box::new(Self { sils, seed }))
    }
}

impl Decoder for SilsRule {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        ParamWriter::new()
            .u64(self.seed)
            .bytes(&sils_spec_bytes(&self.sils))
            .finish()
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        Ok(blocks
            .par_iter()
            .map(|b| {
                let z = extract_sils(&b.cnf, &self.sils).bits.to_bytes();
                BitVector::from_bits((0..b.m()).map(|i| keyed_bit(self.seed, i, &z)))
            })
            .collect())
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// `x̂_i = h_i(z, a_i, b)`: a fixed seeded function of the local input.
#[derive(Clone, Debug)]
pub struct LocalHash {
    pub sils: SilsSpec,
    pub seed: u64,
}

impl LocalHash {
    pub const NAME: &'static str = "local-hash";

    pub fn new(sils: SilsSpec, seed: u64) -> Self {
        Self { sils, seed }
    }

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        let mut r = ParamReader::new(p);
        let seed = r.u64()?;
        let sils = sils_spec_from(r.bytes()?)?;
        r.finish()?;
        Ok(Box::new(Self { sils, seed }))
    }
}

impl Decoder for LocalHash {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        ParamWriter::new()
            .u64(self.seed)
            .bytes(&sils_spec_bytes(&self.sils))
            .finish()
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        Ok(blocks
            .par_iter()
            .map(|b| {
                let z = extract_sils(&b.cnf, &self.sils);
                BitVector::from_bits(
                    (0..b.m()).map(|i| keyed_bit(self.seed, i, &LocalInput::of(b, &z, i).to_bytes())),
                )
            })
            .collect())
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// Predicts `x_i = 1` iff variable `i` occurs positively more often than
/// negated. Reads literal signs, so it is neither local nor sign-invariant.
#[derive(Clone, Debug, Default)]
pub struct MajoritySign;

impl MajoritySign {
    pub const NAME: &'static str = "majority-sign";

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        ParamReader::new(p).finish()?;
        Ok(Box::new(MajoritySign))
    }
}

impl Decoder for MajoritySign {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        Vec::new()
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        Ok(blocks
            .iter()
            .map(|b| {
                BitVector::from_bits((0..b.m()).map(|v| {
                    let (pos, neg) = b.cnf.occurrences(v);
                    pos > neg
                }))
            })
            .collect())
    }
}
