//! Pivot, product-bound and symmetrization success measurements, and the
//! synthetic plug-in task with a known Bayes rule.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{run_decoder, Decoder, PlugInTable, SymWrapper};
use crate::codec::{union_bound_curve, UnionBoundCurve};
use crate::ensemble::{sample_blocks, sample_tuple, EnsembleParams, Instance};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::rng::{tag, LabRng};
use crate::sils::{SilsSpec, SilsVector};
use crate::stats::{bernoulli_se, chi_square_2x2_p};
use crate::symmetry::{public_view, LocalInput};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PivotRates {
    pub n: usize,
    pub pivot: usize,
    pub block_hits: u64,
    pub pivot_hits: u64,
    pub block_rate: f64,
    pub pivot_rate: f64,
    pub pivot_std_err: f64,
}

/// Block-exact and pivot-bit success of `d` on `blocks` run as one tuple.
/// Block correctness implies pivot correctness sample by sample; that
/// inclusion is asserted.
pub fn pivot_success(
    d: &dyn Decoder,
    pivot: usize,
    blocks: &[Instance],
    truths: &[BitVector],
) -> Result<PivotRates> {
    if truths.len() != blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: blocks.len(),
            found: truths.len(),
        });
    }
    let preds = run_decoder(d, blocks)?;
    let mut block_hits = 0;
    let mut pivot_hits = 0;
    for (x_hat, x) in preds.iter().zip(truths) {
        let block = x_hat == x;
        let piv = x_hat.get(pivot)? == x.get(pivot)?;
        assert!(!block || piv, "block correct but pivot wrong");
        block_hits += block as u64;
        pivot_hits += piv as u64;
    }
    let n = blocks.len();
    let rate = |h: u64| if n == 0 { 0.0 } else { h as f64 / n as f64 };
    let pivot_rate = rate(pivot_hits);
    Ok(PivotRates {
        n,
        pivot,
        block_hits,
        pivot_hits,
        block_rate: rate(block_hits),
        pivot_rate,
        pivot_std_err: bernoulli_se(pivot_rate, n as u64),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductBoundParams {
    pub t: usize,
    pub n_tuples: usize,
    /// Test positions `S ⊆ [t]`, fixed before any tuple is drawn.
    pub test: Vec<usize>,
    pub pivot: usize,
    pub alpha: f64,
    pub union_t: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairTest {
    pub j: usize,
    pub k: usize,
    pub p_value: f64,
    pub independent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuccessReport {
    pub decoder: String,
    pub m: usize,
    pub t: usize,
    pub n_tuples: usize,
    pub test: Vec<usize>,
    pub pivot: usize,
    /// Success event per test block: pivot bit correct.
    pub per_block_rates: Vec<f64>,
    pub per_block_exact_rates: Vec<f64>,
    pub all_s_rate: f64,
    pub product: f64,
    pub std_err: f64,
    pub within_3se: bool,
    pub all_s_exact_rate: f64,
    pub exact_product: f64,
    pub pivot_inequality_holds: bool,
    pub pairwise_alpha: f64,
    pub pairwise: Vec<PairTest>,
    pub pairwise_pass: bool,
    pub union_bound: UnionBoundCurve,
}

/// Runs the fixed decoder `d` on `n_tuples` fresh tuples and compares the
/// joint success on the test positions with the product of the marginals.
pub fn product_bound_experiment(
    d: &dyn Decoder,
    ensemble: &EnsembleParams,
    p: &ProductBoundParams,
    seed: u64,
) -> Result<SuccessReport> {
    if p.test.is_empty() || p.test.iter().any(|&j| j >= p.t) {
        return Err(Error::invalid("test", "must be a nonempty subset of [0, t)"));
    }
    if p.pivot >= ensemble.m {
        return Err(Error::IndexOutOfRange {
            index: p.pivot,
            len: ensemble.m,
        });
    }
    // (pivot hit, exact hit) per test position, per tuple.
    let rows: Vec<Vec<(bool, bool)>> = (0..p.n_tuples as u64)
        .into_par_iter()
        .map(|n| {
            let tuple = sample_tuple(p.t, ensemble, seed, n * p.t as u64)?;
            let inst: Vec<Instance> = tuple.iter().map(|b| b.instance.clone()).collect();
            let preds = run_decoder(d, &inst)?;
            p.test
                .iter()
                .map(|&j| {
                    let x = &tuple[j].witness.x;
                    Ok((preds[j].get(p.pivot)? == x.get(p.pivot)?, preds[j] == *x))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = p.n_tuples.max(1) as f64;
    let s = p.test.len();
    let rate = |f: &dyn Fn(&Vec<(bool, bool)>) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    let per_block_rates: Vec<f64> = (0..s).map(|q| rate(&|r| r[q].0)).collect();
    let per_block_exact_rates: Vec<f64> = (0..s).map(|q| rate(&|r| r[q].1)).collect();
    let all_s_rate = rate(&|r| r.iter().all(|c| c.0));
    let all_s_exact_rate = rate(&|r| r.iter().all(|c| c.1));
    let product: f64 = per_block_rates.iter().product();
    let exact_product: f64 = per_block_exact_rates.iter().product();
    // Sampling error of the joint rate plus the delta-method error of the product.
    let var_joint = product * (1.0 - product) / n;
    let var_prod: f64 = product.powi(2)
        * per_block_rates
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| (1.0 - q) / (q * n))
            .sum::<f64>();
    let std_err = (var_joint + var_prod).sqrt();
    let pivot_inequality_holds = rows.iter().all(|r| r.iter().all(|c| !c.1 || c.0));
    let mut pairwise = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            let mut table = [[0u64; 2]; 2];
            for r in &rows {
                table[r[a].0 as usize][r[b].0 as usize] += 1;
            }
            let p_value = chi_square_2x2_p(table);
            pairwise.push(PairTest {
                j: p.test[a],
                k: p.test[b],
                p_value,
                independent: !(p_value < p.alpha),
            });
        }
    }
    let gamma = s as f64 / p.t as f64;
    let eps_hat = per_block_rates
        .iter()
        .map(|q| (q - 0.5).abs())
        .fold(0.0, f64::max)
        .min(0.499);
    let union_bound = union_bound_curve(gamma / 8.0, gamma, eps_hat, gamma / 4.0, &p.union_t)?;
    Ok(SuccessReport {
        decoder: d.id().to_string(),
        m: ensemble.m,
        t: p.t,
        n_tuples: p.n_tuples,
        test: p.test.clone(),
        pivot: p.pivot,
        per_block_rates,
        per_block_exact_rates,
        all_s_rate,
        product,
        std_err,
        within_3se: (all_s_rate - product).abs() <= 3.0 * std_err,
        all_s_exact_rate,
        exact_product,
        pivot_inequality_holds,
        pairwise_alpha: p.alpha,
        pairwise_pass: pairwise.iter().all(|q| q.independent),
        pairwise,
        union_bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetrizationReport {
    pub decoder: String,
    pub m: usize,
    pub n_blocks: usize,
    pub t: usize,
    pub s: usize,
    pub kappa: usize,
    /// Mean per-bit accuracy of `P`.
    pub inner_accuracy: f64,
    /// Mean over flips of the back-mapped per-bit accuracy of `P ∘ g_σ`.
    pub flipped_accuracy: f64,
    /// Per-bit accuracy of the majority output `W_sym(P)`.
    pub majority_accuracy: f64,
    pub difference: f64,
    /// Standard error of the paired per-block difference.
    pub std_err: f64,
    pub within_3se: bool,
}

/// Compares `P` with its sign-flip average over `n_blocks` blocks processed
/// as consecutive tuples of length `t`.
pub fn symmetrization_experiment(
    sym: &SymWrapper,
    ensemble: &EnsembleParams,
    n_blocks: usize,
    t: usize,
    seed: u64,
) -> Result<SymmetrizationReport> {
    if t == 0 {
        return Err(Error::invalid("t", "must be at least 1"));
    }
    let m = ensemble.m;
    let chunks = n_blocks.div_ceil(t);
    // (inner acc, flip-mean acc, majority acc) per block.
    let per_block: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = t.min(n_blocks - c * t);
            let blocks = sample_blocks(ensemble, seed, (c * t) as u64, len)?;
            let inst: Vec<Instance> = blocks.iter().map(|b| public_view(&b.instance)).collect();
            let direct = sym.inner.predict(&inst)?;
            let runs = sym.backmapped_runs(&inst)?;
            let acc = |x: &BitVector, y: &BitVector| {
                (m - x.xor(y).map(|d| d.weight()).unwrap_or(m)) as f64 / m as f64
            };
            Ok(blocks
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let x = &b.witness.x;
                    let flipped =
                        runs.iter().map(|run| acc(&run[j], x)).sum::<f64>() / runs.len() as f64;
                    let maj = BitVector::from_bits((0..m).map(|i| {
                        2 * runs.iter().filter(|run| run[j].bit(i)).count() > runs.len()
                    }));
                    (acc(&direct[j], x), flipped, acc(&maj, x))
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let n = per_block.len().max(1) as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| per_block.iter().map(f).sum::<f64>() / n;
    let inner_accuracy = mean(|r| r.0);
    let flipped_accuracy = mean(|r| r.1);
    let difference = inner_accuracy - flipped_accuracy;
    let var = per_block
        .iter()
        .map(|r| (r.0 - r.1 - difference).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let std_err = (var / n).sqrt();
    Ok(SymmetrizationReport {
        decoder: sym.inner.id().to_string(),
        m,
        n_blocks,
        t,
        s: sym.s,
        kappa: sym.kappa,
        inner_accuracy,
        flipped_accuracy,
        majority_accuracy: mean(|r| r.2),
        difference,
        std_err,
        // A zero-variance difference must be exactly zero.
        within_3se: difference.abs() <= 3.0 * std_err + 1e-12,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BayesReport {
    pub bits: usize,
    pub keys: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Conditional means are drawn uniformly from `[0, 1/2 - margin] ∪ [1/2 + margin, 1]`.
    pub margin: f64,
    pub disagreement: f64,
    pub wrong_cells: usize,
    pub bayes_accuracy: f64,
    pub table_accuracy: f64,
}

/// Finite-alphabet task with known `f_i(u) = P(Y_i = 1 | u)`: fits the
/// plug-in table on `n_train` samples and measures disagreement with the
/// Bayes rule `1[f_i(u) >= 1/2]` on `n_test` fresh inputs.
pub fn synthetic_bayes_task(
    bits: usize,
    keys: usize,
    n_train: usize,
    n_test: usize,
    margin: f64,
    seed: u64,
) -> Result<BayesReport> {
    if keys == 0 || bits == 0 {
        return Err(Error::invalid("keys", "alphabet and bit count must be positive"));
    }
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::invalid("margin", format!("{margin} not in [0, 1/2)")));
    }
    let width = usize::BITS as usize - keys.leading_zeros() as usize;
    let key = |u: usize| {
        LocalInput::new(
            SilsVector {
                bits: BitVector::from_u64(u as u64, width),
            },
            BitVector::zeros(0),
            BitVector::zeros(0),
        )
    };
    let mut rng = LabRng::for_stream(seed, tag::SYNTHETIC, 0);
    let f: Vec<Vec<f64>> = (0..bits)
        .map(|_| {
            (0..keys)
                .map(|_| {
                    let v = rng.gen_range(0.0..0.5 - margin);
                    if rng.gen::<bool>() {
                        v
                    } else {
                        1.0 - v
                    }
                })
                .collect()
        })
        .collect();
    let mut table = PlugInTable::new(bits, SilsSpec::constant());
    let mut rng = LabRng::for_stream(seed, tag::SYNTHETIC, 1);
    for _ in 0..n_train {
        for (i, fi) in f.iter().enumerate() {
            let u = rng.gen_range(0..keys);
            table.add(i, key(u), rng.gen::<f64>() < fi[u]);
        }
    }
    let wrong_cells = (0..bits)
        .flat_map(|i| (0..keys).map(move |u| (i, u)))
        .filter(|&(i, u)| table.lookup(i, &key(u)) != (f[i][u] >= 0.5))
        .count();
    let mut rng = LabRng::for_stream(seed, tag::SYNTHETIC, 2);
    let (mut disagree, mut bayes_hits, mut table_hits) = (0u64, 0u64, 0u64);
    for _ in 0..n_test {
        for (i, fi) in f.iter().enumerate() {
            let u = rng.gen_range(0..keys);
            let y = rng.gen::<f64>() < fi[u];
            let bayes = fi[u] >= 0.5;
            let plug = table.lookup(i, &key(u));
            disagree += (bayes != plug) as u64;
            bayes_hits += (bayes == y) as u64;
            table_hits += (plug == y) as u64;
        }
    }
    let total = (n_test * bits).max(1) as f64;
    Ok(BayesReport {
        bits,
        keys,
        n_train,
        n_test,
        margin,
        disagreement: disagree as f64 / total,
        wrong_cells,
        bayes_accuracy: bayes_hits as f64 / total,
        table_accuracy: table_hits as f64 / total,
    })
}
