//! Tree-likeness and template-sparsification experiments.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::code::{canonical_code, canonical_code_unsigned, canonical_sign_sequence, ChartKey};
use super::pattern::{build_factor_graph, extract_neighborhood};
use crate::ensemble::{sample_blocks, sample_unconditioned, EnsembleParams};
use crate::error::Result;
use crate::rng::{tag, LabRng};
use crate::sils::{extract_sils, SilsSpec};
use crate::stats::{band, bernoulli_se};
use crate::symmetry::LocalInput;

/// Edge-sign marginals for the most frequent unsigned tree shape.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeSignMarginals {
    pub shape_hex: String,
    pub occurrences: u64,
    pub edges: usize,
    pub negated_fraction: Vec<f64>,
    pub max_deviation: f64,
    pub band: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeReport {
    pub m: usize,
    pub alpha: f64,
    pub r: usize,
    pub n: u64,
    pub k_mode: String,
    pub tree_fraction: f64,
    pub tree_std_err: f64,
    pub distinct_charts: usize,
    /// Largest empirical frequency of a single chart (pattern plus labels).
    pub max_chart_freq: f64,
    /// Same without the VV labels.
    pub max_signed_pattern_freq: f64,
    /// Same with signs erased.
    pub max_shape_freq: f64,
    pub top_chart_hex: String,
    pub top_chart_dump: String,
    pub sign_marginals: Option<ShapeSignMarginals>,
}

struct TreeSample {
    is_tree: bool,
    chart: u128,
    pattern: Vec<u8>,
    shape: Vec<u8>,
    signs: Option<Vec<bool>>,
}

fn max_freq<K: std::hash::Hash + Eq + Ord + Clone>(keys: impl Iterator<Item = K>, n: u64) -> (f64, Option<K>) {
    let mut counts: HashMap<K, u64> = HashMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    // Ties go to the smallest key so the result is deterministic.
    let best = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(k, c)| (k.clone(), *c));
    match best {
        Some((k, c)) => (c as f64 / n as f64, Some(k)),
        None => (0.0, None),
    }
}

/// Draws `n` unconditioned instances `(F^h, A, b)`, one uniform root each,
/// and measures how often the radius-`r` neighborhood is a tree and how
/// concentrated the chart distribution is.
pub fn tree_likeness_experiment(params: &EnsembleParams, r: usize, n: u64, seed: u64) -> Result<TreeReport> {
    params.validate()?;
    let samples: Vec<(TreeSample, ChartKey, super::SignedRootedPattern)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = LabRng::for_stream(seed, tag::EXPERIMENT, j);
            let inst = sample_unconditioned(params, &mut rng)?;
            let i = rng.gen_range(0..params.m);
            let g = build_factor_graph(&inst.cnf);
            let p = extract_neighborhood(&g, i, r)?;
            let key = ChartKey::new(&p, inst.vv.label(i), inst.vv.b.clone());
            let s = TreeSample {
                is_tree: p.is_tree,
                chart: key.digest(),
                pattern: key.code.clone(),
                shape: canonical_code_unsigned(&p),
                signs: canonical_sign_sequence(&p),
            };
            Ok((s, key, p))
        })
        .collect::<Result<_>>()?;

    let trees = samples.iter().filter(|s| s.0.is_tree).count() as u64;
    let tree_fraction = trees as f64 / n.max(1) as f64;
    let (max_chart_freq, top) = max_freq(samples.iter().map(|s| s.0.chart), n);
    let (max_signed_pattern_freq, _) = max_freq(samples.iter().map(|s| s.0.pattern.clone()), n);
    let (max_shape_freq, _) = max_freq(samples.iter().map(|s| s.0.shape.clone()), n);
    let distinct_charts = samples
        .iter()
        .map(|s| s.0.chart)
        .collect::<std::collections::HashSet<_>>()
        .len();
    let top_sample = top.and_then(|d| samples.iter().find(|s| s.0.chart == d));
    let (top_chart_hex, top_chart_dump) = top_sample
        .map(|s| (s.1.to_hex(), super::tree_dump(&s.2)))
        .unwrap_or_default();

    // Sign marginals on the most frequent tree shape.
    let (_, top_tree_shape) = max_freq(
        samples.iter().filter(|s| s.0.is_tree).map(|s| s.0.shape.clone()),
        n,
    );
    let sign_marginals = top_tree_shape.map(|shape| {
        let seqs: Vec<&Vec<bool>> = samples
            .iter()
            .filter(|s| s.0.shape == shape)
            .filter_map(|s| s.0.signs.as_ref())
            .collect();
        let occ = seqs.len() as u64;
        let edges = seqs.first().map_or(0, |s| s.len());
        let negated_fraction: Vec<f64> = (0..edges)
            .map(|e| seqs.iter().filter(|s| s[e]).count() as f64 / occ as f64)
            .collect();
        let max_deviation = negated_fraction.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
        let b = band(occ);
        ShapeSignMarginals {
            shape_hex: hex::encode(&shape),
            occurrences: occ,
            edges,
            negated_fraction,
            max_deviation,
            band: b,
            within_band: max_deviation <= b,
        }
    });

    Ok(TreeReport {
        m: params.m,
        alpha: params.alpha,
        r,
        n,
        k_mode: format!("{:?}", params.k_mode).to_lowercase(),
        tree_fraction,
        tree_std_err: bernoulli_se(tree_fraction, n),
        distinct_charts,
        max_chart_freq,
        max_signed_pattern_freq,
        max_shape_freq,
        top_chart_hex,
        top_chart_dump,
        sign_marginals,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupRow {
    pub key: String,
    pub n: u64,
    pub ones: u64,
    pub p_hat: f64,
    pub bias: f64,
    pub band: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupingSummary {
    pub groups: usize,
    pub samples: u64,
    pub groups_at_least_n0: usize,
    /// Fraction of samples falling in groups smaller than `n0`.
    pub small_group_mass: f64,
    pub max_bias_asserted: f64,
    /// Every group with at least `n0` samples, sorted by key.
    pub asserted: Vec<GroupRow>,
    pub flagged: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SparsifyReport {
    pub m: usize,
    pub n_blocks: u64,
    pub n0: u64,
    pub chart_radius: Option<usize>,
    pub chart_blocks: u64,
    pub by_chart: Option<GroupingSummary>,
    pub by_local_input: GroupingSummary,
    /// No asserted u-group leaves its band.
    pub passed: bool,
}

fn summarize(groups: HashMap<u128, (u64, u64)>, n0: u64) -> GroupingSummary {
    let samples: u64 = groups.values().map(|g| g.0).sum();
    let small: u64 = groups.values().filter(|g| g.0 < n0).map(|g| g.0).sum();
    let mut asserted: Vec<GroupRow> = groups
        .iter()
        .filter(|(_, g)| g.0 >= n0)
        .map(|(k, &(n, ones))| {
            let p_hat = ones as f64 / n as f64;
            let bias = (p_hat - 0.5).abs();
            let b = band(n);
            GroupRow {
                key: format!("{k:032x}"),
                n,
                ones,
                p_hat,
                bias,
                band: b,
                flagged: bias > b,
            }
        })
        .collect();
    asserted.sort_by(|a, b| a.key.cmp(&b.key));
    GroupingSummary {
        groups: groups.len(),
        samples,
        groups_at_least_n0: asserted.len(),
        small_group_mass: if samples == 0 { 0.0 } else { small as f64 / samples as f64 },
        max_bias_asserted: asserted.iter().map(|g| g.bias).fold(0.0, f64::max),
        flagged: asserted.iter().filter(|g| g.flagged).count(),
        asserted,
    }
}

/// Groups witness bits of on-promise blocks by local input `u` (pooled over
/// bit positions) and, on the first `chart_blocks` blocks, by chart key.
pub fn sparsification_experiment(
    params: &EnsembleParams,
    sils: &SilsSpec,
    chart_radius: Option<usize>,
    n_blocks: u64,
    chart_blocks: u64,
    n0: u64,
    seed: u64,
) -> Result<SparsifyReport> {
    let blocks = sample_blocks(params, seed, 0, n_blocks as usize)?;
    let per_block: Vec<Vec<(Option<u128>, u128, bool)>> = blocks
        .par_iter()
        .enumerate()
        .map(|(j, blk)| {
            let inst = &blk.instance;
            let z = extract_sils(&inst.cnf, sils);
            let g = chart_radius
                .filter(|_| (j as u64) < chart_blocks)
                .map(|r| (build_factor_graph(&inst.cnf), r));
            (0..inst.m())
                .map(|i| {
                    let a_i = inst.vv.label(i);
                    let chart = g.as_ref().map(|(g, r)| {
                        let p = extract_neighborhood(g, i, *r).expect("root in range");
                        ChartKey {
                            code: canonical_code(&p),
                            a_i: a_i.clone(),
                            b: inst.vv.b.clone(),
                        }
                        .digest()
                    });
                    let u = LocalInput::new(z.clone(), a_i, inst.vv.b.clone()).digest();
                    (chart, u, blk.witness.x.bit(i))
                })
                .collect()
        })
        .collect();

    let mut by_u: HashMap<u128, (u64, u64)> = HashMap::new();
    let mut by_chart: HashMap<u128, (u64, u64)> = HashMap::new();
    for rows in &per_block {
        for &(chart, u, x) in rows {
            let e = by_u.entry(u).or_default();
            e.0 += 1;
            e.1 += x as u64;
            if let Some(c) = chart {
                let e = by_chart.entry(c).or_default();
                e.0 += 1;
                e.1 += x as u64;
            }
        }
    }
    let by_local_input = summarize(by_u, n0);
    let passed = by_local_input.flagged == 0;
    Ok(SparsifyReport {
        m: params.m,
        n_blocks,
        n0,
        chart_radius,
        chart_blocks: chart_blocks.min(n_blocks),
        by_chart: chart_radius.map(|_| summarize(by_chart, n0)),
        by_local_input,
        passed,
    })
}
