//! Decoders, the symmetrization and ERM wrappers, and the success experiments.
//!
//! A decoder maps a tuple of public instances to one predicted witness per
//! block. Everything a decoder needs is in its registry name plus parameter
//! bytes, so `(name, params)` is its complete description.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{gamma_len, DescriptionLedger, LedgerKind};
use crate::ensemble::Instance;
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::symmetry::public_view;

mod basic;
mod erm;
mod oracle;
mod params;
mod success;
mod sym;

pub use basic::{ConstantZero, LocalHash, MajoritySign, SilsRule};
pub use erm::{
    switch_experiment, ErmOutcome, ErmSplit, ErmWrapper, LocalTable, PlugInTable, SwitchReport,
    Votes, TABLE_MAGIC, TABLE_VERSION,
};
pub use oracle::{self_reduce, CosetDecider, OracleDecoder, SelfReduction, UsatDecider};
pub use params::{ParamReader, ParamWriter};
pub use success::{
    pivot_success, product_bound_experiment, symmetrization_experiment, synthetic_bayes_task,
    BayesReport, PivotRates, ProductBoundParams, SuccessReport, SymmetrizationReport,
};
pub use sym::SymWrapper;

pub trait Decoder: Send + Sync {
    fn name(&self) -> &str;

    /// Canonical parameter bytes; rebuilding from them yields an identical decoder.
    fn params(&self) -> Vec<u8>;

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>>;

    /// True when every output bit is a function of that bit's local input
    /// `(z, a_i, b)` alone.
    fn is_local(&self) -> bool {
        false
    }

    /// How the parameter bits split between kinds. Must sum to `8 * params().len()`.
    fn param_split(&self) -> Vec<(&'static str, LedgerKind, u64)> {
        vec![("parameters", LedgerKind::Parameters, 8 * self.params().len() as u64)]
    }

    fn id(&self) -> DecoderId {
        DecoderId::of(self.name(), &self.params())
    }

    /// Bits the codecs spend to name this decoder.
    fn description_length(&self) -> DescriptionLedger {
        let id = self.id();
        let params = self.params();
        let mut ledger = DescriptionLedger::new();
        ledger.push("decoder identity", LedgerKind::Identity, id.bits());
        ledger.push(
            "parameter length",
            LedgerKind::Control,
            gamma_len(params.len() as u64 + 1) as u64,
        );
        for (label, kind, bits) in self.param_split() {
            ledger.push(label, kind, bits);
        }
        ledger
    }
}

/// Registry name plus the first 64 bits of `SHA-256(name || 0 || params)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecoderId {
    pub name: String,
    pub digest: u64,
}

impl DecoderId {
    pub fn of(name: &str, params: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(name.as_bytes());
        h.update([0]);
        h.update(params);
        let d = h.finalize();
        Self {
            name: name.to_string(),
            digest: u64::from_be_bytes(d[..8].try_into().unwrap()),
        }
    }

    /// Length byte, name bytes, 64-bit digest.
    pub fn bits(&self) -> u64 {
        8 + 8 * self.name.len() as u64 + 64
    }
}

impl fmt::Display for DecoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{:016x}", self.name, self.digest)
    }
}

/// Runs `d` on the public views of `blocks` and checks the output shape.
pub fn run_decoder(d: &dyn Decoder, blocks: &[Instance]) -> Result<Vec<BitVector>> {
    let public: Vec<Instance> = blocks.iter().map(public_view).collect();
    let out = d.predict(&public)?;
    if out.len() != blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: blocks.len(),
            found: out.len(),
        });
    }
    for (x, b) in out.iter().zip(blocks) {
        if x.len() != b.m() {
            return Err(Error::DimensionMismatch {
                expected: b.m(),
                found: x.len(),
            });
        }
    }
    Ok(out)
}

pub type Constructor = fn(&[u8], &Registry) -> Result<Box<dyn Decoder>>;

#[derive(Clone)]
pub struct Registry {
    ctors: BTreeMap<String, Constructor>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            ctors: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(ConstantZero::NAME, ConstantZero::from_params);
        r.register(SilsRule::NAME, SilsRule::from_params);
        r.register(LocalHash::NAME, LocalHash::from_params);
        r.register(MajoritySign::NAME, MajoritySign::from_params);
        r.register(LocalTable::NAME, LocalTable::from_params);
        r.register(OracleDecoder::NAME, OracleDecoder::from_params);
        r.register(SymWrapper::NAME, SymWrapper::from_params);
        r.register(ErmWrapper::NAME, ErmWrapper::from_params);
        r
    }

    pub fn register(&mut self, name: &str, ctor: Constructor) {
        self.ctors.insert(name.to_string(), ctor);
    }

    pub fn names(&self) -> Vec<&str> {
        self.ctors.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, params: &[u8]) -> Result<Box<dyn Decoder>> {
        let ctor = self
            .ctors
            .get(name)
            .ok_or_else(|| Error::UnknownDecoder(name.to_string()))?;
        ctor(params, self)
    }

    /// Builds and checks the rebuilt decoder against the stored digest.
    pub fn resolve(&self, id: &DecoderId, params: &[u8]) -> Result<Box<dyn Decoder>> {
        let d = self.build(&id.name, params)?;
        if d.id() != *id {
            return Err(Error::DigestMismatch {
                name: id.name.clone(),
            });
        }
        Ok(d)
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.ctors.keys()).finish()
    }
}

/// Inner decoder as nested `(name, params)`.
pub(crate) fn write_inner(w: ParamWriter, inner: &dyn Decoder) -> ParamWriter {
    w.bytes(inner.name().as_bytes()).bytes(&inner.params())
}

pub(crate) fn read_inner(r: &mut ParamReader<'_>, reg: &Registry) -> Result<Box<dyn Decoder>> {
    let name = std::str::from_utf8(r.bytes()?)
        .map_err(|_| Error::Malformed("decoder name is not UTF-8".into()))?
        .to_string();
    let params = r.bytes()?;
    reg.build(&name, params)
}

#[cfg(test)]
mod tests;
