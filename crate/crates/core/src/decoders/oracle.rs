//! Search-to-decision self-reduction over an exponential-time USAT decider.

use rayon::prelude::*;

use super::{Decoder, ParamReader, ParamWriter, Registry};
use crate::ensemble::{
    count_solutions_with_limit, Instance, SolutionCount, VvLayer, Witness, DEFAULT_COSET_LIMIT,
};
use crate::error::{Error, Result};
use crate::gf2::BitVector;

pub trait UsatDecider: Sync {
    fn satisfiable(&self, inst: &Instance) -> Result<bool>;
}

/// Decides satisfiability by scanning the affine coset of the XOR layer.
#[derive(Clone, Copy, Debug)]
pub struct CosetDecider {
    pub coset_limit: usize,
}

impl Default for CosetDecider {
    fn default() -> Self {
        Self {
            coset_limit: DEFAULT_COSET_LIMIT,
        }
    }
}

impl UsatDecider for CosetDecider {
    fn satisfiable(&self, inst: &Instance) -> Result<bool> {
        Ok(count_solutions_with_limit(inst, 1, self.coset_limit)? != SolutionCount::Exact(0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfReduction {
    pub witness: Witness,
    pub calls: usize,
}

/// `inst` with the extra rows `x_j = prefix_j` for `j < prefix.len()`.
fn restrict(inst: &Instance, prefix: &[bool]) -> Result<Instance> {
    let mut a = inst.vv.a.clone();
    let mut b: Vec<bool> = inst.vv.b.iter().collect();
    for (j, &v) in prefix.iter().enumerate() {
        a.push_row(BitVector::unit(inst.m(), j)?)?;
        b.push(v);
    }
    Instance::new(inst.cnf.clone(), VvLayer::new(a, BitVector::from_bits(b))?)
}

/// Fixes bits in index order with one decider call each: `x_i = 0` if the
/// restriction with `x_i = 0` is satisfiable, else `x_i = 1`.
pub fn self_reduce(inst: &Instance, decider: &dyn UsatDecider) -> Result<SelfReduction> {
    let m = inst.m();
    let mut prefix = Vec::with_capacity(m);
    let mut calls = 0;
    for _ in 0..m {
        prefix.push(false);
        calls += 1;
        if !decider.satisfiable(&restrict(inst, &prefix)?)? {
            *prefix.last_mut().unwrap() = true;
        }
    }
    let x = BitVector::from_bits(prefix.iter().copied());
    let witness = Witness { x };
    if witness.satisfies(&inst.cnf, &inst.vv) {
        return Ok(SelfReduction { witness, calls });
    }
    // Only on failure: find the first bit whose forced value was inconsistent.
    for j in 0..m {
        if !decider.satisfiable(&restrict(inst, &prefix[..=j])?)? {
            return Err(Error::DeciderInconsistency { bit: j });
        }
    }
    Err(Error::DeciderInconsistency { bit: m.saturating_sub(1) })
}

/// Self-reduction with the coset decider. Its description is a registry
/// name plus one parameter, constant in `t`.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleDecoder {
    pub decider: CosetDecider,
}

impl OracleDecoder {
    pub const NAME: &'static str = "oracle";

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        let mut r = ParamReader::new(p);
        let coset_limit = r.u8()? as usize;
        r.finish()?;
        Ok(Box::new(Self {
            decider: CosetDecider { coset_limit },
        }))
    }
}

impl Decoder for OracleDecoder {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        ParamWriter::new().u8(self.decider.coset_limit as u8).finish()
    }

    /// Off-promise blocks get whatever assignment the reduction produced; an
    /// unsatisfiable block yields all zeros.
    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        blocks
            .par_iter()
            .map(|b| match self_reduce(b, &self.decider) {
                Ok(r) => Ok(r.witness.x),
                Err(Error::DeciderInconsistency { .. }) => Ok(BitVector::zeros(b.m())),
                Err(e) => Err(e),
            })
            .collect()
    }
}
