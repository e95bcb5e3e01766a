//! Oracle versus local decoders: ledger totals as the tuple grows.

use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentConfig, Section, Table};
use crate::codec::{encode_coarse, encode_fine, union_bound_curve, LedgerKind, UnionBoundCurve};
use crate::decoders::{run_decoder, ConstantZero, Decoder, LocalHash, OracleDecoder, SilsRule};
use crate::ensemble::{sample_tuple, Instance};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::rng::{tag, LabRng};
use crate::stats::ols_slope;
use crate::symmetry::public_view;

#[derive(Clone, Debug, Serialize)]
pub struct ClashRow {
    pub t: usize,
    pub oracle_total: f64,
    /// Oracle ledger without the `O(log t)` control fields.
    pub oracle_non_control: f64,
    pub oracle_payload: f64,
    pub local_total: f64,
    pub local_payload: f64,
    pub local_pivot_accuracy: f64,
    pub local_tuple_success: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalCurve {
    pub decoder: String,
    pub decoder_bits: u64,
    pub mean_payload: Vec<f64>,
    pub mean_total: Vec<f64>,
    pub tuple_success: Vec<f64>,
    pub pivot_accuracy: f64,
    /// OLS slope of mean patch bits against `t`.
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClashReport {
    pub m: usize,
    pub tuples_per_t: usize,
    pub ts: Vec<usize>,
    pub oracle_decoder: String,
    pub oracle_non_control_constant: bool,
    pub oracle_payload_zero: bool,
    pub locals: Vec<LocalCurve>,
    /// Local decoder with the smallest patched ledger at the largest `t`.
    pub best_local: String,
    pub best_slope: f64,
    pub rows: Vec<ClashRow>,
    pub t0_oracle_bits: u64,
    pub t0_local_bits: u64,
    pub t0_header_only: bool,
    pub union_bound: UnionBoundCurve,
}

struct TupleLedgers {
    oracle_total: u64,
    oracle_control: u64,
    oracle_payload: u64,
    /// Per local decoder: (total, payload, pivot hits, all blocks exact).
    local: Vec<(u64, u64, usize, bool)>,
}

fn local_decoders(cfg: &ExperimentConfig) -> Result<Vec<Box<dyn Decoder>>> {
    Ok(vec![
        Box::new(ConstantZero),
        Box::new(SilsRule::new(cfg.sils.clone(), cfg.decoder.seed)),
        Box::new(LocalHash::new(cfg.sils.clone(), cfg.decoder.seed)),
        Box::new(cfg.trained_table()?),
    ])
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n.max(1) as f64
}

/// Ledger totals over `t ∈ {4, ..., t_max}`: the oracle self-reduction under
/// the coarse codec, and each local decoder patched by the fine codec.
pub fn clash_demo(cfg: &ExperimentConfig) -> Result<ClashReport> {
    let p = &cfg.ensemble;
    let t_max = cfg.trials.clash_t_max.unwrap_or_else(|| p.default_t());
    if t_max < 4 {
        return Err(Error::invalid("trials.clash_t_max", "must be at least 4"));
    }
    let n = cfg.trials.clash_tuples.max(1);
    let pivot = cfg.trials.pivot;
    let oracle = OracleDecoder {
        decider: crate::decoders::CosetDecider {
            coset_limit: p.coset_limit,
        },
    };
    let locals = local_decoders(cfg)?;
    let ts: Vec<usize> = (4..=t_max).collect();
    let per_t: Vec<Vec<TupleLedgers>> = ts
        .iter()
        .map(|&t| {
            let seed = LabRng::for_stream(cfg.seed, tag::TUPLE, t as u64).child_seed();
            (0..n)
                .into_par_iter()
                .map(|q| {
                    let tuple = sample_tuple(t, p, seed, (q * t) as u64)?;
                    let inst: Vec<Instance> = tuple.iter().map(|b| public_view(&b.instance)).collect();
                    let truths: Vec<BitVector> = tuple.iter().map(|b| b.witness.x.clone()).collect();
                    let (_, ol) = encode_coarse(&oracle, &inst, &truths)?;
                    let local = locals
                        .iter()
                        .map(|d| {
                            let (_, l) = encode_fine(d.as_ref(), &inst, &truths)?;
                            let preds = run_decoder(d.as_ref(), &inst)?;
                            let hits = preds.iter().zip(&truths).filter(|(a, b)| a.bit(pivot) == b.bit(pivot)).count();
                            Ok((l.total, l.bits_of(LedgerKind::Payload), hits, preds == truths))
                        })
                        .collect::<Result<_>>()?;
                    Ok(TupleLedgers {
                        oracle_total: ol.total,
                        oracle_control: ol.bits_of(LedgerKind::Control),
                        oracle_payload: ol.bits_of(LedgerKind::Payload),
                        local,
                    })
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let oracle_fixed: Vec<u64> = per_t
        .iter()
        .flatten()
        .map(|l| l.oracle_total - l.oracle_control)
        .collect();
    let oracle_non_control_constant = oracle_fixed.windows(2).all(|w| w[0] == w[1]);
    let oracle_payload_zero = per_t.iter().flatten().all(|l| l.oracle_payload == 0);
    let tf: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
    let curves: Vec<LocalCurve> = locals
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mean_payload: Vec<f64> = per_t.iter().map(|r| mean(r.iter().map(|l| l.local[k].1 as f64), n)).collect();
            let mean_total: Vec<f64> = per_t.iter().map(|r| mean(r.iter().map(|l| l.local[k].0 as f64), n)).collect();
            let tuple_success = per_t
                .iter()
                .map(|r| mean(r.iter().map(|l| l.local[k].3 as u8 as f64), n))
                .collect();
            let (hits, blocks) = per_t.iter().zip(&ts).fold((0usize, 0usize), |acc, (r, &t)| {
                (acc.0 + r.iter().map(|l| l.local[k].2).sum::<usize>(), acc.1 + r.len() * t)
            });
            LocalCurve {
                decoder: d.id().to_string(),
                decoder_bits: d.description_length().total,
                slope: ols_slope(&tf, &mean_payload),
                mean_payload,
                mean_total,
                tuple_success,
                pivot_accuracy: hits as f64 / blocks.max(1) as f64,
            }
        })
        .collect();
    let best = (0..curves.len())
        .min_by(|&a, &b| {
            let last = |k: usize| curves[k].mean_total.last().copied().unwrap_or(0.0);
            last(a).total_cmp(&last(b))
        })
        .expect("at least one local decoder");
    let rows = ts
        .iter()
        .enumerate()
        .map(|(q, &t)| {
            let r = &per_t[q];
            ClashRow {
                t,
                oracle_total: mean(r.iter().map(|l| l.oracle_total as f64), n),
                oracle_non_control: mean(r.iter().map(|l| (l.oracle_total - l.oracle_control) as f64), n),
                oracle_payload: mean(r.iter().map(|l| l.oracle_payload as f64), n),
                local_total: curves[best].mean_total[q],
                local_payload: curves[best].mean_payload[q],
                local_pivot_accuracy: mean(r.iter().map(|l| l.local[best].2 as f64 / t as f64), n),
                local_tuple_success: curves[best].tuple_success[q],
            }
        })
        .collect();
    let (_, o0) = encode_coarse(&oracle, &[], &[])?;
    let (_, l0) = encode_fine(locals[best].as_ref(), &[], &[])?;
    let eps_hat = (curves[best].pivot_accuracy - 0.5).abs().min(0.499);
    let union_bound = union_bound_curve(1.0 / 8.0, 1.0, eps_hat, 1.0 / 4.0, &ts)?;
    Ok(ClashReport {
        m: p.m,
        tuples_per_t: n,
        ts,
        oracle_decoder: oracle.id().to_string(),
        oracle_non_control_constant,
        oracle_payload_zero,
        best_local: curves[best].decoder.clone(),
        best_slope: curves[best].slope,
        locals: curves,
        rows,
        t0_oracle_bits: o0.total,
        t0_local_bits: l0.total,
        t0_header_only: o0.bits_of(LedgerKind::Payload) == 0 && l0.bits_of(LedgerKind::Payload) == 0,
        union_bound,
    })
}

pub(crate) fn clash_section(cfg: &ExperimentConfig) -> Result<Section> {
    let r = clash_demo(cfg)?;
    let mut table = Table::new(
        "clash",
        &["t", "oracle_total", "oracle_non_control", "local_total", "local_payload", "local_tuple_success", "union_exponent"],
    );
    for (row, u) in r.rows.iter().zip(&r.union_bound.rows) {
        table.push(vec![
            row.t.to_string(),
            format!("{:.3}", row.oracle_total),
            format!("{:.3}", row.oracle_non_control),
            format!("{:.3}", row.local_total),
            format!("{:.3}", row.local_payload),
            format!("{:.6}", row.local_tuple_success),
            format!("{:.6}", u.exponent),
        ]);
    }
    let mut s = Section::new("clash", &r);
    s.assert(
        10,
        "oracle_ledger_constant",
        r.oracle_non_control_constant && r.oracle_payload_zero,
        format!(
            "oracle identity and parameter bits constant over t = {}..={}, zero payload",
            r.ts[0],
            r.ts[r.ts.len() - 1]
        ),
    );
    s.assert(
        10,
        "local_patch_slope",
        r.best_slope >= 1.0,
        format!("best local decoder {} patch slope {:.3} bits per block", r.best_local, r.best_slope),
    );
    s.assert(
        10,
        "empty_tuple_header_only",
        r.t0_header_only,
        format!("t = 0 ledgers: oracle {} bits, local {} bits", r.t0_oracle_bits, r.t0_local_bits),
    );
    s.tables.push(table);
    Ok(s)
}
