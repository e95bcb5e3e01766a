//! Solution counting over the affine coset of the XOR layer.

use std::fmt;

use serde::Serialize;

use super::{Instance, SignedCnf};
use crate::error::{Error, Result};
use crate::gf2::{gaussian_affine_solve, BitVector};

/// Coset dimensions above this are refused rather than enumerated.
pub const DEFAULT_COSET_LIMIT: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionCount {
    Exact(u64),
    AtLeast(u64),
}

impl fmt::Display for SolutionCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionCount::Exact(n) => write!(f, "{n}"),
            SolutionCount::AtLeast(n) => write!(f, ">={n}"),
        }
    }
}

/// Clause masks for `m <= 64`: a clause is falsified by `x` iff
/// `x & vars == falsifying`.
#[derive(Clone, Debug)]
pub struct CompiledCnf {
    clauses: Vec<(u64, u64)>,
}

impl CompiledCnf {
    pub fn new(cnf: &SignedCnf) -> Result<Self> {
        if cnf.m > 64 {
            return Err(Error::invalid("m", "word-packed evaluation needs m <= 64"));
        }
        let clauses = cnf
            .clauses
            .iter()
            .map(|c| {
                let mut vars = 0u64;
                let mut fals = 0u64;
                for l in c {
                    vars |= 1 << l.var;
                    // Positive literal is falsified by 0, negated one by 1.
                    if l.negated {
                        fals |= 1 << l.var;
                    }
                }
                (vars, fals)
            })
            .collect();
        Ok(Self { clauses })
    }

    #[inline]
    pub fn satisfied(&self, x: u64) -> bool {
        self.clauses.iter().all(|&(vars, fals)| x & vars != fals)
    }
}

struct Coset {
    particular: u64,
    basis: Vec<u64>,
}

fn coset_of(inst: &Instance, limit: usize) -> Result<Option<Coset>> {
    let m = inst.m();
    if m > 64 {
        return Err(Error::invalid("m", "enumeration needs m <= 64"));
    }
    let sol = gaussian_affine_solve(&inst.vv.a, &inst.vv.b)?;
    if sol.dimension() > limit {
        return Err(Error::BudgetExceeded {
            dimension: sol.dimension(),
            limit,
            m,
            rank: sol.rank,
        });
    }
    Ok(sol.particular.as_ref().map(|p| Coset {
        particular: p.to_u64(),
        basis: sol.null_basis.iter().map(BitVector::to_u64).collect(),
    }))
}

/// Visits coset members satisfying the CNF in Gray-code order until `visit`
/// returns `false`.
fn scan(inst: &Instance, limit: usize, mut visit: impl FnMut(u64) -> bool) -> Result<()> {
    let compiled = CompiledCnf::new(&inst.cnf)?;
    let Some(coset) = coset_of(inst, limit)? else {
        return Ok(());
    };
    let mut x = coset.particular;
    if compiled.satisfied(x) && !visit(x) {
        return Ok(());
    }
    let d = coset.basis.len();
    for step in 1u64..(1u64 << d) {
        x ^= coset.basis[step.trailing_zeros() as usize];
        if compiled.satisfied(x) && !visit(x) {
            break;
        }
    }
    Ok(())
}

/// Number of solutions of `F ∧ (A x = b)`, exact below `cap`.
pub fn count_solutions_capped(inst: &Instance, cap: u64) -> Result<SolutionCount> {
    count_solutions_with_limit(inst, cap, DEFAULT_COSET_LIMIT)
}

pub fn count_solutions_with_limit(inst: &Instance, cap: u64, limit: usize) -> Result<SolutionCount> {
    let mut n = 0u64;
    scan(inst, limit, |_| {
        n += 1;
        n < cap
    })?;
    Ok(if n >= cap {
        SolutionCount::AtLeast(cap)
    } else {
        SolutionCount::Exact(n)
    })
}

/// The witness when the solution is unique, `None` otherwise.
pub(crate) fn unique_or_none(inst: &Instance, limit: usize) -> Result<Option<BitVector>> {
    let mut found = None;
    let mut n = 0;
    scan(inst, limit, |x| {
        n += 1;
        found = Some(x);
        n < 2
    })?;
    Ok(if n == 1 {
        found.map(|x| BitVector::from_u64(x, inst.m()))
    } else {
        None
    })
}

pub(crate) fn unique_solution(inst: &Instance, limit: usize) -> Result<BitVector> {
    unique_or_none(inst, limit)?.ok_or_else(|| Error::OffPromise {
        count: "not exactly one".into(),
    })
}

/// All satisfying assignments of a signed CNF by a plain `2^m` scan, as
/// packed integers. Test-oracle and small-`m` use only.
pub fn brute_force_solutions(cnf: &SignedCnf) -> Result<Vec<u64>> {
    if cnf.m > 30 {
        return Err(Error::BudgetExceeded {
            dimension: cnf.m,
            limit: 30,
            m: cnf.m,
            rank: 0,
        });
    }
    let compiled = CompiledCnf::new(cnf)?;
    Ok((0u64..(1u64 << cnf.m))
        .filter(|&x| compiled.satisfied(x))
        .collect())
}
