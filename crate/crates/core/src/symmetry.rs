//! Promise-preserving sign flips, back-maps and the neutrality experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{sample_blocks, EnsembleParams, Instance, VvLayer, Witness};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::sils::{extract_sils, SilsSpec, SilsVector};
use crate::stats::band;

/// `u_i(Φ) = (z, a_i, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalInput {
    pub z: SilsVector,
    pub a_i: BitVector,
    pub b: BitVector,
}

impl LocalInput {
    pub fn new(z: SilsVector, a_i: BitVector, b: BitVector) -> Self {
        Self { z, a_i, b }
    }

    /// Local input of bit `i` of `inst`, given its sketch.
    pub fn of(inst: &Instance, z: &SilsVector, i: usize) -> Self {
        Self::new(z.clone(), inst.vv.label(i), inst.vv.b.clone())
    }

    pub fn bit_len(&self) -> usize {
        self.z.r_m() + self.a_i.len() + self.b.len()
    }

    /// Canonical bytes: the three wire-form bit vectors in order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.z.bits.to_bytes();
        out.extend(self.a_i.to_bytes());
        out.extend(self.b.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let (z, n1) = BitVector::from_bytes(bytes)?;
        let (a_i, n2) = BitVector::from_bytes(&bytes[n1..])?;
        let (b, n3) = BitVector::from_bytes(&bytes[n1 + n2..])?;
        Ok((Self::new(SilsVector { bits: z }, a_i, b), n1 + n2 + n3))
    }

    pub fn digest(&self) -> u128 {
        u128::from_le_bytes(Sha256::digest(self.to_bytes())[..16].try_into().unwrap())
    }
}

impl fmt::Display for LocalInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.a_i, self.b)
    }
}

/// `(F^h, A, b) -> (F^{(id,σ)h}, A, b ⊕ Aσ)` on the public part only; any
/// cached witness is dropped. Used on decoder inputs.
pub fn flip_public(inst: &Instance, sigma: &BitVector) -> Result<Instance> {
    let cnf = inst.cnf.flip_signs(sigma)?;
    let shift = inst.vv.a.mat_vec_mul(sigma)?;
    let vv = VvLayer::new(inst.vv.a.clone(), inst.vv.b.xor(&shift)?)?;
    Instance::new(cnf, vv)
}

/// `g_σ` on an on-promise instance; the witness becomes `X ⊕ σ`.
pub fn sign_flip_g(inst: &Instance, sigma: &BitVector) -> Result<Instance> {
    let w = inst.require_witness()?;
    let x = w.x.xor(sigma)?;
    flip_public(inst, sigma)?.with_witness_unchecked_uniqueness(Witness { x })
}

/// `T_i = g_{e_i}`: flips variable `i`'s literal signs and adds column `i` to `b`.
pub fn involution_ti(inst: &Instance, i: usize) -> Result<Instance> {
    let e = BitVector::unit(inst.m(), i)?;
    sign_flip_g(inst, &e)
}

/// Instance with its witness stripped, as handed to decoders.
pub fn public_view(inst: &Instance) -> Instance {
    Instance::new(inst.cnf.clone(), inst.vv.clone()).expect("dimensions already validated")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackmapMode {
    /// `x̂ ⊕ σ_i`: undoes the witness shift `X -> X ⊕ σ`.
    #[default]
    Coordinate,
    /// `x̂ ⊕ <a_i, Aσ>`: the label-space reading of the inner-product formula.
    Vvlabel,
}

impl FromStr for BackmapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate" => Ok(BackmapMode::Coordinate),
            "vvlabel" => Ok(BackmapMode::Vvlabel),
            other => Err(Error::invalid("backmap", format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for BackmapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackmapMode::Coordinate => "coordinate",
            BackmapMode::Vvlabel => "vvlabel",
        })
    }
}

/// Maps a prediction for bit `i` of `g_σ(Φ)` back to `Φ`'s coordinates.
/// `shift` is `Aσ`, needed only by the label convention.
pub fn back_map(
    pred: bool,
    mode: BackmapMode,
    i: usize,
    a_i: &BitVector,
    sigma: &BitVector,
    shift: &BitVector,
) -> Result<bool> {
    Ok(match mode {
        BackmapMode::Coordinate => pred ^ sigma.get(i)?,
        BackmapMode::Vvlabel => pred ^ a_i.inner_product(shift)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BucketRow {
    pub bit: usize,
    pub bucket: String,
    pub n: u64,
    pub ones: u64,
    pub p_hat: f64,
    pub band: f64,
    /// Bucket is large enough to be asserted.
    pub asserted: bool,
    pub flag: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViewSummary {
    pub view: String,
    pub buckets: usize,
    pub asserted_buckets: usize,
    pub flagged: usize,
    pub rows: Vec<BucketRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeutralityReport {
    pub m: usize,
    pub n_blocks: u64,
    pub n0: u64,
    pub sils: SilsSpec,
    pub marginal: ViewSummary,
    pub sils_view: ViewSummary,
    pub negative_control: ViewSummary,
    /// SILS buckets and marginals stay in band and the control leaves it somewhere.
    pub passed: bool,
}

fn summarize(view: &str, counts: BTreeMap<(usize, String), (u64, u64)>, n0: u64) -> ViewSummary {
    let rows: Vec<BucketRow> = counts
        .into_iter()
        .map(|((bit, bucket), (n, ones))| {
            let p_hat = ones as f64 / n as f64;
            let b = band(n);
            let asserted = n >= n0;
            BucketRow {
                bit,
                bucket,
                n,
                ones,
                p_hat,
                band: b,
                asserted,
                flag: asserted && (p_hat - 0.5).abs() > b,
            }
        })
        .collect();
    ViewSummary {
        view: view.into(),
        buckets: rows.len(),
        asserted_buckets: rows.iter().filter(|r| r.asserted).count(),
        flagged: rows.iter().filter(|r| r.flag).count(),
        rows,
    }
}

/// Empirical `Pr[X_i = 1 | view]` over `n_blocks` on-promise blocks, for the
/// trivial view, the sketch `z`, and the sign-sensitive positive-occurrence
/// count of variable `i`.
pub fn neutrality_experiment(
    params: &EnsembleParams,
    sils: &SilsSpec,
    n_blocks: u64,
    n0: u64,
    seed: u64,
) -> Result<NeutralityReport> {
    sils.validate()?;
    let blocks = sample_blocks(params, seed, 0, n_blocks as usize)?;
    let per_block: Vec<(String, Vec<(bool, usize)>)> = blocks
        .par_iter()
        .map(|blk| {
            let z = extract_sils(&blk.instance.cnf, sils).to_hex();
            let mut pos = vec![0usize; params.m];
            for l in blk.instance.cnf.clauses.iter().flatten() {
                if !l.negated {
                    pos[l.var as usize] += 1;
                }
            }
            let bits = (0..params.m).map(|i| (blk.witness.x.bit(i), pos[i])).collect();
            (z, bits)
        })
        .collect();

    let mut marginal = BTreeMap::new();
    let mut by_z = BTreeMap::new();
    let mut control = BTreeMap::new();
    let bump = |map: &mut BTreeMap<(usize, String), (u64, u64)>, key, x: bool| {
        let e = map.entry(key).or_insert((0, 0));
        e.0 += 1;
        e.1 += x as u64;
    };
    for (z, bits) in &per_block {
        for (i, &(x, pos)) in bits.iter().enumerate() {
            bump(&mut marginal, (i, "all".to_string()), x);
            bump(&mut by_z, (i, z.clone()), x);
            bump(&mut control, (i, format!("pos={pos}")), x);
        }
    }
    let marginal = summarize("marginal", marginal, n0);
    let sils_view = summarize("sils", by_z, n0);
    let negative_control = summarize("positive_occurrences", control, n0);
    let passed = marginal.flagged == 0 && sils_view.flagged == 0 && negative_control.flagged > 0;
    Ok(NeutralityReport {
        m: params.m,
        n_blocks,
        n0,
        sils: sils.clone(),
        marginal,
        sils_view,
        negative_control,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{count_solutions_capped, sample_blocks, SolutionCount};
    use crate::rng::LabRng;
    use rand::Rng;

    fn blocks(m: usize, n: usize, seed: u64) -> Vec<Instance> {
        sample_blocks(&EnsembleParams::with_m(m), seed, 0, n)
            .unwrap()
            .into_iter()
            .map(|b| b.instance)
            .collect()
    }

    #[test]
    fn ti_is_an_involution_and_shifts_the_witness() {
        for inst in blocks(12, 200, 1) {
            let x = inst.witness().unwrap().x.clone();
            for i in 0..12 {
                let t = involution_ti(&inst, i).unwrap();
                let mut expect = x.clone();
                expect.flip(i).unwrap();
                assert_eq!(t.witness().unwrap().x, expect);
                assert_eq!(count_solutions_capped(&t, 2).unwrap(), SolutionCount::Exact(1));
                assert_eq!(involution_ti(&t, i).unwrap(), inst);
            }
        }
    }

    #[test]
    fn g_sigma_composes_from_involutions() {
        let mut rng = LabRng::new(2, 0);
        for inst in blocks(12, 100, 2) {
            let sigma = crate::hash::uniform_bits(12, &mut rng);
            let g = sign_flip_g(&inst, &sigma).unwrap();
            let mut composed = inst.clone();
            for i in sigma.ones() {
                composed = involution_ti(&composed, i).unwrap();
            }
            assert_eq!(g, composed);
            assert_eq!(g.witness().unwrap().x, inst.witness().unwrap().x.xor(&sigma).unwrap());
            // Independent recount on the full cube.
            let sols = crate::ensemble::brute_force_solutions(&g.cnf).unwrap();
            let hits: Vec<u64> = sols
                .into_iter()
                .filter(|&x| g.vv.a.mat_vec_mul(&BitVector::from_u64(x, 12)).unwrap() == g.vv.b)
                .collect();
            assert_eq!(hits, vec![g.witness().unwrap().x.to_u64()]);
        }
        let inst = &blocks(12, 1, 3)[0];
        assert_eq!(&sign_flip_g(inst, &BitVector::zeros(12)).unwrap(), inst);
        assert_eq!(
            sign_flip_g(inst, &BitVector::unit(12, 5).unwrap()).unwrap(),
            involution_ti(inst, 5).unwrap()
        );
    }

    #[test]
    fn off_promise_input_is_rejected() {
        let inst = public_view(&blocks(12, 1, 4)[0]);
        assert!(matches!(involution_ti(&inst, 0), Err(Error::OffPromise { .. })));
    }

    #[test]
    fn back_map_trivial_cases() {
        let a = BitVector::from_u64(0b101, 3);
        let zero_m = BitVector::zeros(8);
        let zero_k = BitVector::zeros(3);
        for mode in [BackmapMode::Coordinate, BackmapMode::Vvlabel] {
            assert!(back_map(true, mode, 2, &a, &zero_m, &zero_k).unwrap());
            assert!(!back_map(false, mode, 2, &zero_k, &zero_m, &zero_k).unwrap());
        }
    }

    #[test]
    fn coordinate_back_map_recovers_the_witness() {
        // Predict bit i of g_σ(Φ) by the true (X ⊕ σ)_i, then map back.
        let mut rng = LabRng::new(5, 0);
        let mut vv_misses = 0;
        let mut total = 0;
        for inst in blocks(12, 200, 5) {
            let x = &inst.witness().unwrap().x;
            let sigma = crate::hash::uniform_bits(12, &mut rng);
            let g = sign_flip_g(&inst, &sigma).unwrap();
            let shift = inst.vv.a.mat_vec_mul(&sigma).unwrap();
            for i in 0..12 {
                let pred = g.witness().unwrap().x.bit(i);
                let a_i = inst.vv.label(i);
                let y = back_map(pred, BackmapMode::Coordinate, i, &a_i, &sigma, &shift).unwrap();
                assert_eq!(y, x.bit(i));
                let y2 = back_map(pred, BackmapMode::Vvlabel, i, &a_i, &sigma, &shift).unwrap();
                vv_misses += (y2 != x.bit(i)) as usize;
                total += 1;
            }
        }
        // The label convention does not invert the witness shift.
        assert!(vv_misses > total / 4, "{vv_misses}/{total}");
    }

    #[test]
    fn local_input_round_trip_and_length() {
        let inst = &blocks(16, 1, 6)[0];
        let spec = SilsSpec::default();
        let z = extract_sils(&inst.cnf, &spec);
        let u = LocalInput::of(inst, &z, 3);
        assert_eq!(u.bit_len(), spec.length(16) + 2 * inst.k());
        let bytes = u.to_bytes();
        let (v, used) = LocalInput::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(u, v);
    }

    #[test]
    fn neutrality_small_run() {
        let p = EnsembleParams::with_m(12);
        let rep = neutrality_experiment(&p, &SilsSpec::default(), 4000, 200, 7).unwrap();
        assert_eq!(rep.marginal.flagged, 0);
        assert_eq!(rep.sils_view.flagged, 0);
        assert!(rep.negative_control.flagged > 0);
        assert!(rep.passed);
    }

    #[test]
    fn constant_sketch_matches_marginal() {
        let p = EnsembleParams::with_m(12);
        let rep = neutrality_experiment(&p, &SilsSpec::constant(), 1000, 200, 8).unwrap();
        let a: Vec<(u64, u64)> = rep.marginal.rows.iter().map(|r| (r.n, r.ones)).collect();
        let b: Vec<(u64, u64)> = rep.sils_view.rows.iter().map(|r| (r.n, r.ones)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn flips_preserve_sign_statistics() {
        // g_σ(Φ) and Φ should look alike: compare the positive-literal count
        // histograms of flipped and fresh blocks with a χ² homogeneity test.
        let mut rng = LabRng::new(9, 0);
        let fresh = blocks(12, 3000, 9);
        let other = blocks(12, 3000, 10);
        let bins = |insts: &[Instance]| {
            let mut h = [0u64; 8];
            for inst in insts {
                let pos = inst.cnf.clauses.iter().flatten().filter(|l| !l.negated).count();
                let total = 3 * inst.cnf.clause_count();
                h[(8 * pos / (total + 1)).min(7)] += 1;
            }
            h
        };
        let flipped: Vec<Instance> = other
            .iter()
            .map(|inst| {
                let sigma = crate::hash::uniform_bits(12, &mut rng);
                let _ = rng.gen::<u8>();
                sign_flip_g(inst, &sigma).unwrap()
            })
            .collect();
        let (h1, h2) = (bins(&fresh), bins(&flipped));
        let mut stat = 0.0;
        let mut dof = 0.0;
        for c in 0..8 {
            let tot = (h1[c] + h2[c]) as f64;
            if tot == 0.0 {
                continue;
            }
            dof += 1.0;
            for h in [h1[c], h2[c]] {
                let e = tot / 2.0;
                stat += (h as f64 - e).powi(2) / e;
            }
        }
        let p = crate::stats::chi_square_sf(stat, dof - 1.0);
        assert!(p > 0.001, "p = {p}, {h1:?} vs {h2:?}");
    }
}
