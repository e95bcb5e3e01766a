//! The masked-and-isolated block distribution and its exact witness oracle.

mod io;
mod solve;

pub use io::{instance_from_bytes, instance_to_bytes, instance_to_dimacs, INSTANCE_MAGIC};
pub use solve::{
    brute_force_solutions, count_solutions_capped, count_solutions_with_limit, CompiledCnf,
    SolutionCount, DEFAULT_COSET_LIMIT,
};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};
use crate::hash::{sample_parity_matrix, sample_rhs, RhsMode};
use crate::rng::{tag, LabRng};

/// How the VV row count `k` is chosen per rejection trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// `k` uniform in `{0, ..., m-1}` per trial.
    #[default]
    Uniform,
    /// `k = round(c1 * log2 m)`.
    Fixed,
}

impl std::str::FromStr for KMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(KMode::Uniform),
            "fixed" => Ok(KMode::Fixed),
            other => Err(Error::invalid("k_mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BMode {
    #[default]
    Uniform,
    /// δ-biased right-hand side with `δ = m^(-c2)`.
    DeltaBiased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleParams {
    pub m: usize,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub b_mode: BMode,
    pub k_mode: KMode,
    /// Largest affine-coset dimension the uniqueness check will enumerate.
    pub coset_limit: usize,
    pub trial_limit: u64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            m: 16,
            alpha: 4.2,
            c1: 0.5,
            c2: 10.0,
            c3: 0.5,
            c4: 1.0,
            b_mode: BMode::Uniform,
            k_mode: KMode::Uniform,
            coset_limit: DEFAULT_COSET_LIMIT,
            trial_limit: 100_000,
        }
    }
}

impl EnsembleParams {
    pub fn with_m(m: usize) -> Self {
        Self {
            m,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 4 {
            return Err(Error::invalid("m", format!("{} < 4", self.m)));
        }
        for (field, v) in [
            ("alpha", self.alpha),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    /// `M = floor(alpha * m)`.
    pub fn clause_count(&self) -> usize {
        (self.alpha * self.m as f64).floor() as usize
    }

    /// `round(c1 * log2 m)`, clamped to `[1, m-1]`.
    pub fn fixed_k(&self) -> usize {
        let k = (self.c1 * (self.m as f64).log2()).round() as usize;
        k.clamp(1, self.m - 1)
    }

    /// `max(1, round(c3 * log2 m))`.
    pub fn default_radius(&self) -> usize {
        ((self.c3 * (self.m as f64).log2()).round() as usize).max(1)
    }

    /// `round(c4 * m)`.
    pub fn default_t(&self) -> usize {
        (self.c4 * self.m as f64).round() as usize
    }

    pub fn delta(&self) -> f64 {
        (self.m as f64).powf(-self.c2)
    }

    pub fn rhs_mode(&self) -> RhsMode {
        match self.b_mode {
            BMode::Uniform => RhsMode::Uniform,
            BMode::DeltaBiased => RhsMode::DeltaBiased {
                delta: self.delta(),
            },
        }
    }
}

/// Unsigned 3-uniform hypergraph: each clause is 3 distinct variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cnf {
    pub m: usize,
    pub clauses: Vec<[u32; 3]>,
}

impl Cnf {
    pub fn new(m: usize, clauses: Vec<[u32; 3]>) -> Result<Self> {
        for c in &clauses {
            if c.iter().any(|&v| v as usize >= m) {
                return Err(Error::invalid("clauses", format!("variable out of range in {c:?}")));
            }
            if c[0] == c[1] || c[0] == c[2] || c[1] == c[2] {
                return Err(Error::invalid("clauses", format!("repeated variable in {c:?}")));
            }
        }
        Ok(Self { m, clauses })
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }
}

/// An element `(pi, sigma)` of the mask group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    pi: Vec<u32>,
    sigma: BitVector,
}

impl Mask {
    pub fn new(pi: Vec<u32>, sigma: BitVector) -> Result<Self> {
        let m = pi.len();
        if sigma.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: sigma.len(),
            });
        }
        let mut seen = vec![false; m];
        for &p in &pi {
            let p = p as usize;
            if p >= m || seen[p] {
                return Err(Error::invalid("pi", "not a permutation"));
            }
            seen[p] = true;
        }
        Ok(Self { pi, sigma })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            pi: (0..m as u32).collect(),
            sigma: BitVector::zeros(m),
        }
    }

    pub fn sign_flip(sigma: BitVector) -> Self {
        Self {
            pi: (0..sigma.len() as u32).collect(),
            sigma,
        }
    }

    pub fn random(m: usize, rng: &mut LabRng) -> Self {
        let mut pi: Vec<u32> = (0..m as u32).collect();
        pi.shuffle(rng);
        let sigma = BitVector::from_bits((0..m).map(|_| rng.gen::<bool>()));
        Self { pi, sigma }
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[u32] {
        &self.pi
    }

    pub fn sigma(&self) -> &BitVector {
        &self.sigma
    }
}

/// A literal: variable index plus negation flag (sign bit 1 = negated).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: u32, negated: bool) -> Self {
        Self { var, negated }
    }

    /// A positive literal is satisfied by `x_v = 1`, a negated one by `x_v = 0`.
    pub fn satisfied_by(&self, x: &BitVector) -> bool {
        x.bit(self.var as usize) != self.negated
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedCnf {
    pub m: usize,
    pub clauses: Vec<[Literal; 3]>,
}

impl SignedCnf {
    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    /// Literal-by-literal evaluation, kept independent of [`CompiledCnf`].
    pub fn satisfied_by(&self, x: &BitVector) -> bool {
        x.len() == self.m
            && self
                .clauses
                .iter()
                .all(|c| c.iter().any(|l| l.satisfied_by(x)))
    }

    /// Toggles the sign of every literal on a variable with `sigma[v] = 1`.
    pub fn flip_signs(&self, sigma: &BitVector) -> Result<SignedCnf> {
        if sigma.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: sigma.len(),
            });
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| c.map(|l| Literal::new(l.var, l.negated ^ sigma.bit(l.var as usize))))
            .collect();
        Ok(SignedCnf {
            m: self.m,
            clauses,
        })
    }

    /// The unsigned hypergraph underneath.
    pub fn unsigned(&self) -> Cnf {
        Cnf {
            m: self.m,
            clauses: self.clauses.iter().map(|c| c.map(|l| l.var)).collect(),
        }
    }

    /// Occurrence counts `(positive, negated)` of variable `v`.
    pub fn occurrences(&self, v: usize) -> (usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        for l in self.clauses.iter().flatten() {
            if l.var as usize == v {
                if l.negated {
                    neg += 1;
                } else {
                    pos += 1;
                }
            }
        }
        (pos, neg)
    }
}

/// Applies `h = (pi, sigma)` to an all-positive `F`: variable `j` becomes the
/// literal on `pi(j)` with sign `sigma[pi(j)]`. Clause order is preserved.
pub fn apply_mask(f: &Cnf, h: &Mask) -> Result<SignedCnf> {
    if h.m() != f.m {
        return Err(Error::DimensionMismatch {
            expected: f.m,
            found: h.m(),
        });
    }
    let clauses = f
        .clauses
        .iter()
        .map(|c| {
            c.map(|j| {
                let v = h.pi[j as usize];
                Literal::new(v, h.sigma.bit(v as usize))
            })
        })
        .collect();
    Ok(SignedCnf { m: f.m, clauses })
}

/// The XOR layer `A x = b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VvLayer {
    pub a: BitMatrix,
    pub b: BitVector,
}

impl VvLayer {
    pub fn new(a: BitMatrix, b: BitVector) -> Result<Self> {
        if a.row_count() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.row_count(),
                found: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn label(&self, i: usize) -> BitVector {
        self.a.column(i).expect("column index checked by caller")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Witness {
    pub x: BitVector,
}

impl Witness {
    /// Satisfies every clause and `A x = b`.
    pub fn satisfies(&self, cnf: &SignedCnf, vv: &VvLayer) -> bool {
        cnf.satisfied_by(&self.x)
            && vv.a.mat_vec_mul(&self.x).map(|ax| ax == vv.b).unwrap_or(false)
    }
}

/// A block `(F^h, A, b)`, optionally carrying its verified unique witness.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub cnf: SignedCnf,
    pub vv: VvLayer,
    witness: Option<Witness>,
}

impl Instance {
    /// An instance with no cached witness (promise status unknown).
    pub fn new(cnf: SignedCnf, vv: VvLayer) -> Result<Self> {
        if vv.a.col_count() != cnf.m {
            return Err(Error::DimensionMismatch {
                expected: cnf.m,
                found: vv.a.col_count(),
            });
        }
        Ok(Self {
            cnf,
            vv,
            witness: None,
        })
    }

    /// Counts solutions and attaches the witness iff there is exactly one.
    pub fn certify(cnf: SignedCnf, vv: VvLayer, coset_limit: usize) -> Result<Self> {
        let mut inst = Self::new(cnf, vv)?;
        match count_solutions_with_limit(&inst, 2, coset_limit)? {
            SolutionCount::Exact(1) => {
                let x = solve::unique_solution(&inst, coset_limit)?;
                inst.witness = Some(Witness { x });
                Ok(inst)
            }
            other => Err(Error::OffPromise {
                count: other.to_string(),
            }),
        }
    }

    /// Attaches a witness that the caller has already verified by other means;
    /// it is rechecked for satisfaction here (uniqueness is the caller's claim).
    pub(crate) fn with_witness_unchecked_uniqueness(mut self, w: Witness) -> Result<Self> {
        if !w.satisfies(&self.cnf, &self.vv) {
            return Err(Error::OffPromise {
                count: "0 (witness does not satisfy)".into(),
            });
        }
        self.witness = Some(w);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.cnf.m
    }

    pub fn k(&self) -> usize {
        self.vv.k()
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    pub fn is_on_promise(&self) -> bool {
        self.witness.is_some()
    }

    pub fn require_witness(&self) -> Result<&Witness> {
        self.witness.as_ref().ok_or_else(|| Error::OffPromise {
            count: "unknown (no certified witness)".into(),
        })
    }

    pub(crate) fn from_parts(cnf: SignedCnf, vv: VvLayer, witness: Option<Witness>) -> Self {
        Self { cnf, vv, witness }
    }
}

/// `M = floor(alpha m)` clauses, each a uniform 3-subset of distinct variables,
/// drawn independently with replacement.
pub fn sample_base_cnf(params: &EnsembleParams, rng: &mut LabRng) -> Result<Cnf> {
    if params.m < 4 {
        return Err(Error::invalid("m", format!("{} < 4", params.m)));
    }
    let m = params.m as u32;
    let clauses = (0..params.clause_count())
        .map(|_| {
            let a = rng.gen_range(0..m);
            let b = loop {
                let b = rng.gen_range(0..m);
                if b != a {
                    break b;
                }
            };
            let c = loop {
                let c = rng.gen_range(0..m);
                if c != a && c != b {
                    break c;
                }
            };
            [a, b, c]
        })
        .collect();
    Ok(Cnf {
        m: params.m,
        clauses,
    })
}

fn sample_vv(params: &EnsembleParams, k: usize, rng: &mut LabRng) -> Result<VvLayer> {
    let a = sample_parity_matrix(k, params.m, rng);
    let b = sample_rhs(k, params.rhs_mode(), rng)?;
    VvLayer::new(a, b)
}

fn draw_k(params: &EnsembleParams, rng: &mut LabRng) -> usize {
    match params.k_mode {
        KMode::Uniform => rng.gen_range(0..params.m),
        KMode::Fixed => params.fixed_k(),
    }
}

/// One unconditioned draw of `(F^h, A, b)`; no promise is checked.
pub fn sample_unconditioned(params: &EnsembleParams, rng: &mut LabRng) -> Result<Instance> {
    let f = sample_base_cnf(params, rng)?;
    let h = Mask::random(params.m, rng);
    let cnf = apply_mask(&f, &h)?;
    let k = draw_k(params, rng);
    let vv = sample_vv(params, k, rng)?;
    Instance::new(cnf, vv)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub instance: Instance,
    pub witness: Witness,
    pub trials: u64,
}

/// Rejection-samples `(F, h, A, b)` until the instance has exactly one solution.
pub fn sample_block(params: &EnsembleParams, rng: &mut LabRng) -> Result<Block> {
    params.validate()?;
    for trial in 1..=params.trial_limit {
        let inst = sample_unconditioned(params, rng)?;
        if let Some(x) = solve::unique_or_none(&inst, params.coset_limit)? {
            let witness = Witness { x };
            let instance = inst.with_witness_unchecked_uniqueness(witness.clone())?;
            return Ok(Block {
                instance,
                witness,
                trials: trial,
            });
        }
    }
    Err(Error::TrialLimit {
        trials: params.trial_limit,
    })
}

/// Block number `index` of the experiment seeded by `seed`.
pub fn sample_indexed_block(params: &EnsembleParams, seed: u64, index: u64) -> Result<Block> {
    let mut rng = LabRng::for_stream(seed, tag::BLOCK, index);
    sample_block(params, &mut rng)
}

/// Blocks `first .. first + count`, fanned out over the rayon pool and
/// returned in index order.
pub fn sample_blocks(
    params: &EnsembleParams,
    seed: u64,
    first: u64,
    count: usize,
) -> Result<Vec<Block>> {
    (0..count as u64)
        .into_par_iter()
        .map(|j| sample_indexed_block(params, seed, first + j))
        .collect()
}

/// `t` i.i.d. blocks; block `j` uses substream `first + j`.
pub fn sample_tuple(t: usize, params: &EnsembleParams, seed: u64, first: u64) -> Result<Vec<Block>> {
    if t == 0 {
        return Err(Error::invalid("t", "must be at least 1"));
    }
    sample_blocks(params, seed, first, t)
}

#[derive(Clone, Debug, Serialize)]
pub struct IsolationEstimate {
    pub solutions: usize,
    pub k: usize,
    pub draws: u64,
    pub isolated: u64,
    pub rate: f64,
    pub std_err: f64,
}

/// Empirical probability that a fresh `(A, b)` with `k = ceil(log2 |S|) + 1`
/// leaves exactly one solution of `F` on `A x = b`.
pub fn vv_isolation_rate(f: &SignedCnf, rng: &mut LabRng, n_draws: u64) -> Result<IsolationEstimate> {
    let solutions = brute_force_solutions(f)?;
    if solutions.is_empty() {
        return Err(Error::Unsatisfiable);
    }
    let s = solutions.len();
    let k = ceil_log2(s) + 1;
    let m = f.m;
    let mut isolated = 0;
    let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut rows = vec![0u64; k];
    for _ in 0..n_draws {
        for r in rows.iter_mut() {
            *r = rng.gen::<u64>() & mask;
        }
        let b: u64 = rng.gen::<u64>() & ((1u64 << k) - 1);
        let mut hits = 0;
        for &x in &solutions {
            let ax = rows
                .iter()
                .enumerate()
                .fold(0u64, |acc, (r, &row)| acc | (((row & x).count_ones() & 1) as u64) << r);
            if ax == b {
                hits += 1;
                if hits > 1 {
                    break;
                }
            }
        }
        if hits == 1 {
            isolated += 1;
        }
    }
    let rate = isolated as f64 / n_draws as f64;
    Ok(IsolationEstimate {
        solutions: s,
        k,
        draws: n_draws,
        isolated,
        rate,
        std_err: crate::stats::bernoulli_se(rate, n_draws),
    })
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}
