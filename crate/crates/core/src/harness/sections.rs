//! Experiment sections shared by the subcommands and the acceptance criteria.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Artifact, ExperimentConfig, Section, Table};
use crate::codec::{
    audit, binomial, binomial_rank, binomial_unrank, encode_coarse, encode_fine, ErrorMask,
};
use crate::decoders::{
    product_bound_experiment, run_decoder, self_reduce, switch_experiment, symmetrization_experiment,
    synthetic_bayes_task, ConstantZero, CosetDecider, Decoder, ErmSplit, ErmWrapper, LocalHash,
    ProductBoundParams, Registry,
};
use crate::ensemble::{
    apply_mask, brute_force_solutions, instance_to_bytes, instance_to_dimacs, sample_base_cnf,
    sample_blocks, sample_tuple, sample_unconditioned, Cnf, EnsembleParams, Instance, Literal, Mask,
    SignedCnf,
};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::locality::{sparsification_experiment, tree_likeness_experiment};
use crate::rng::{tag, LabRng};
use crate::sils::{check_invariance, extract_sils};
use crate::symmetry::{involution_ti, neutrality_experiment, public_view, ViewSummary};

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

/// Solutions of `F ∧ (A x = b)` by Gaussian elimination and literal-level
/// evaluation of every coset member. Shares no code with the Gray-code scan.
pub(crate) fn enumerate_on_layer(inst: &Instance, limit: usize) -> Result<Vec<BitVector>> {
    let coset = inst.vv.a.solve_affine(&inst.vv.b)?;
    if coset.dimension() > limit {
        return Err(Error::BudgetExceeded {
            dimension: coset.dimension(),
            limit,
            m: inst.m(),
            rank: coset.rank,
        });
    }
    Ok(coset
        .members()
        .into_iter()
        .filter(|x| inst.cnf.satisfied_by(x))
        .collect())
}

pub(crate) fn involution_suite(cfg: &ExperimentConfig) -> Result<Section> {
    let p = &cfg.ensemble;
    let n = cfg.trials.n_blocks as usize;
    let blocks = sample_blocks(p, cfg.seed, 0, n)?;
    // (i, involutive, witness shifted, recount unique)
    let rows: Vec<(usize, bool, bool, bool)> = blocks
        .par_iter()
        .enumerate()
        .map(|(j, blk)| {
            let i = LabRng::for_stream(cfg.seed, tag::EXPERIMENT, j as u64).gen_range(0..p.m);
            let t = involution_ti(&blk.instance, i)?;
            let back = involution_ti(&t, i)?;
            let mut shifted = blk.witness.x.clone();
            shifted.flip(i)?;
            let sols = enumerate_on_layer(&t, p.coset_limit)?;
            Ok((
                i,
                back == blk.instance,
                t.witness().map(|w| &w.x) == Some(&shifted),
                sols.len() == 1 && sols[0] == shifted,
            ))
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&(usize, bool, bool, bool)) -> bool| rows.iter().filter(|r| f(r)).count();
    let involutive = count(|r| r.1);
    let shifted = count(|r| r.2);
    let unique = count(|r| r.3);
    let mean_trials = blocks.iter().map(|b| b.trials as f64).sum::<f64>() / n.max(1) as f64;
    let mut k_hist = vec![0u64; p.m + 1];
    for b in &blocks {
        k_hist[b.instance.k()] += 1;
    }
    let mut s = Section::new(
        "involution",
        json!({
            "m": p.m,
            "alpha": p.alpha,
            "k_mode": p.k_mode,
            "blocks": n,
            "mean_trials": mean_trials,
            "k_histogram": k_hist,
            "involutive": involutive,
            "witness_shifted": shifted,
            "unique_after_recount": unique,
        }),
    );
    s.assert(1, "involution_identity", involutive == n, format!("{involutive}/{n} blocks satisfy T_i(T_i(x)) = x"));
    s.assert(1, "witness_shift", shifted == n, format!("{shifted}/{n} witnesses equal X xor e_i"));
    s.assert(1, "uniqueness_recount", unique == n, format!("{unique}/{n} unique under independent recount"));
    let mut table = Table::new("blocks", &["index", "k", "trials", "i", "witness"]);
    for (j, (b, r)) in blocks.iter().zip(&rows).enumerate() {
        table.push(vec![
            j.to_string(),
            b.instance.k().to_string(),
            b.trials.to_string(),
            r.0.to_string(),
            b.witness.x.to_string(),
        ]);
    }
    s.tables.push(table);
    if let Some(b) = blocks.first() {
        s.artifacts.push(Artifact::new("inst", instance_to_bytes(&b.instance)));
        s.artifacts.push(Artifact::new("cnf", instance_to_dimacs(&b.instance).into_bytes()));
    }
    Ok(s)
}

#[derive(Serialize)]
struct IsolationRow {
    formula: usize,
    solutions: usize,
    k: usize,
    draws: u64,
    rate: f64,
    threshold: f64,
    passed: bool,
}

/// Plain random 3-CNF: every literal gets its own sign. Masked formulas
/// use one sign per variable and nearly always exceed 1024 solutions.
fn random_signs(f: &Cnf, rng: &mut LabRng) -> SignedCnf {
    SignedCnf {
        m: f.m,
        clauses: f
            .clauses
            .iter()
            .map(|c| c.map(|v| Literal::new(v, rng.gen())))
            .collect(),
    }
}

pub(crate) fn isolation_suite(cfg: &ExperimentConfig) -> Result<Section> {
    let p = &cfg.ensemble;
    let mut rng = LabRng::for_stream(cfg.seed, tag::MASK, 0);
    let mut formulas = Vec::new();
    let mut attempts = 0u64;
    while formulas.len() < cfg.trials.formulas {
        attempts += 1;
        if attempts > p.trial_limit {
            return Err(Error::TrialLimit { trials: p.trial_limit });
        }
        let f = random_signs(&sample_base_cnf(p, &mut rng)?, &mut rng);
        let n = brute_force_solutions(&f)?.len();
        if (2..=1024).contains(&n) {
            formulas.push(f);
        }
    }
    let rows: Vec<IsolationRow> = formulas
        .par_iter()
        .enumerate()
        .map(|(j, f)| {
            let mut rng = LabRng::for_stream(cfg.seed, tag::HASH_DRAW, j as u64);
            let est = crate::ensemble::vv_isolation_rate(f, &mut rng, cfg.trials.hash_draws)?;
            let threshold = 0.125 - 3.0 * est.std_err;
            Ok(IsolationRow {
                formula: j,
                solutions: est.solutions,
                k: est.k,
                draws: est.draws,
                rate: est.rate,
                threshold,
                passed: est.rate >= threshold,
            })
        })
        .collect::<Result<_>>()?;
    let ok = rows.iter().filter(|r| r.passed).count();
    let min_rate = rows.iter().map(|r| r.rate).fold(1.0, f64::min);
    let mut table = Table::new("isolation", &["formula", "solutions", "k", "draws", "rate", "threshold"]);
    for r in &rows {
        table.push(vec![
            r.formula.to_string(),
            r.solutions.to_string(),
            r.k.to_string(),
            r.draws.to_string(),
            fmt_f(r.rate),
            fmt_f(r.threshold),
        ]);
    }
    let mut s = Section::new(
        "isolation",
        json!({"m": p.m, "attempts": attempts, "min_rate": min_rate, "formulas": rows}),
    );
    s.assert(
        2,
        "isolation_rate",
        ok == rows.len(),
        format!("{ok}/{} formulas at or above 1/8 - 3se (min rate {min_rate:.4})", rows.len()),
    );
    s.tables.push(table);
    Ok(s)
}

fn view_table(name: &str, views: &[&ViewSummary]) -> Table {
    let mut t = Table::new(name, &["view", "bit", "bucket", "n", "ones", "p_hat", "band", "asserted", "flag"]);
    for v in views {
        for r in &v.rows {
            t.push(vec![
                v.view.clone(),
                r.bit.to_string(),
                r.bucket.clone(),
                r.n.to_string(),
                r.ones.to_string(),
                fmt_f(r.p_hat),
                fmt_f(r.band),
                r.asserted.to_string(),
                r.flag.to_string(),
            ]);
        }
    }
    t
}

pub(crate) fn neutrality(cfg: &ExperimentConfig) -> Result<Section> {
    let r = neutrality_experiment(&cfg.ensemble, &cfg.sils, cfg.trials.n_blocks, cfg.trials.n0, cfg.seed)?;
    let table = view_table("neutrality", &[&r.marginal, &r.sils_view, &r.negative_control]);
    let mut s = Section::new("neutrality", &r);
    s.assert(
        3,
        "marginal_in_band",
        r.marginal.flagged == 0,
        format!("{} of {} asserted marginals flagged", r.marginal.flagged, r.marginal.asserted_buckets),
    );
    s.assert(
        3,
        "sils_buckets_in_band",
        r.sils_view.flagged == 0,
        format!(
            "{} of {} asserted sketch buckets flagged ({} buckets total)",
            r.sils_view.flagged, r.sils_view.asserted_buckets, r.sils_view.buckets
        ),
    );
    s.assert(
        3,
        "negative_control_detected",
        r.negative_control.flagged > 0,
        format!(
            "{} of {} asserted control buckets flagged",
            r.negative_control.flagged, r.negative_control.asserted_buckets
        ),
    );
    s.tables.push(table);
    Ok(s)
}

pub(crate) fn sils_invariance(cfg: &ExperimentConfig) -> Result<Section> {
    let p = &cfg.ensemble;
    let n = cfg.trials.invariance_triples;
    let bound = cfg.sils.c_z * (p.m as f64).log2();
    // (invariant, sketch length)
    let rows: Vec<(bool, usize)> = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = LabRng::for_stream(cfg.seed, tag::MASK, 1 + j);
            let f = sample_base_cnf(p, &mut rng)?;
            let ok = check_invariance(&f, &cfg.sils, 2, &mut rng)?;
            let len = extract_sils(&apply_mask(&f, &Mask::random(p.m, &mut rng))?, &cfg.sils).r_m();
            Ok((ok, len))
        })
        .collect::<Result<_>>()?;
    let invariant = rows.iter().filter(|r| r.0).count();
    let max_len = rows.iter().map(|r| r.1).max().unwrap_or(0);
    let mut s = Section::new(
        "sils_invariance",
        json!({"m": p.m, "triples": n, "invariant": invariant, "max_length": max_len, "length_bound": bound}),
    );
    s.assert(4, "sketch_invariant", invariant == n, format!("{invariant}/{n} (F, h, g) triples agree"));
    s.assert(
        4,
        "sketch_length",
        max_len as f64 <= bound,
        format!("max length {max_len} <= c_z log2 m = {bound:.2}"),
    );
    Ok(s)
}

pub(crate) fn sparsify(cfg: &ExperimentConfig) -> Result<Section> {
    let t = &cfg.trials;
    let r = sparsification_experiment(
        &cfg.ensemble,
        &cfg.sils,
        Some(cfg.radius()),
        t.n_blocks,
        t.chart_blocks,
        t.sparsify_n0,
        cfg.seed,
    )?;
    let u = &r.by_local_input;
    let mut table = Table::new("groups", &["grouping", "key", "n", "ones", "p_hat", "band", "flagged"]);
    for (name, g) in [("local_input", Some(u)), ("chart", r.by_chart.as_ref())] {
        for row in g.map(|g| g.asserted.as_slice()).unwrap_or_default() {
            table.push(vec![
                name.into(),
                row.key.clone(),
                row.n.to_string(),
                row.ones.to_string(),
                fmt_f(row.p_hat),
                fmt_f(row.band),
                row.flagged.to_string(),
            ]);
        }
    }
    let mut s = Section::new("sparsify", &r);
    s.assert(
        6,
        "local_input_groups_in_band",
        r.passed,
        format!(
            "{} of {} u-groups with >= {} samples flagged ({} groups; {:.4} of mass in smaller groups){}",
            u.flagged,
            u.groups_at_least_n0,
            r.n0,
            u.groups,
            u.small_group_mass,
            if u.groups_at_least_n0 == 0 { "; vacuous: no group reaches the threshold" } else { "" }
        ),
    );
    s.tables.push(table);
    Ok(s)
}

pub(crate) fn treelike(cfg: &ExperimentConfig) -> Result<Section> {
    let t = &cfg.trials;
    if t.tree_m.len() < 2 {
        return Err(Error::invalid("trials.tree_m", "need at least two sizes for a trend"));
    }
    let r = cfg.radius();
    let reports = t
        .tree_m
        .iter()
        .map(|&m| {
            let p = EnsembleParams {
                m,
                alpha: t.tree_alpha,
                k_mode: t.tree_k_mode,
                ..cfg.ensemble.clone()
            };
            tree_likeness_experiment(&p, r, t.tree_samples, cfg.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let (first, last) = (&reports[0], &reports[reports.len() - 1]);
    let mut table = Table::new(
        "treelike",
        &["m", "r", "n", "tree_fraction", "tree_std_err", "distinct_charts", "max_chart_freq", "max_shape_freq"],
    );
    for q in &reports {
        table.push(vec![
            q.m.to_string(),
            q.r.to_string(),
            q.n.to_string(),
            fmt_f(q.tree_fraction),
            fmt_f(q.tree_std_err),
            q.distinct_charts.to_string(),
            fmt_f(q.max_chart_freq),
            fmt_f(q.max_shape_freq),
        ]);
    }
    let ratio = first.max_chart_freq / last.max_chart_freq.max(f64::MIN_POSITIVE);
    let mut s = Section::new("treelike", &reports);
    s.assert(
        6,
        "tree_fraction_grows",
        last.tree_fraction > first.tree_fraction,
        format!(
            "tree fraction {:.4} at m={} vs {:.4} at m={}",
            first.tree_fraction, first.m, last.tree_fraction, last.m
        ),
    );
    s.assert(
        6,
        "chart_frequency_halves",
        ratio >= 2.0,
        format!(
            "max chart frequency {:.5} -> {:.5} (ratio {ratio:.2})",
            first.max_chart_freq, last.max_chart_freq
        ),
    );
    let mut dump = String::new();
    for q in &reports {
        dump.push_str(&format!("# m={} r={} top chart\n{}\n{}\n", q.m, q.r, q.top_chart_hex, q.top_chart_dump));
    }
    s.tables.push(table);
    s.artifacts.push(Artifact::new("charts.txt", dump.into_bytes()));
    Ok(s)
}

pub(crate) fn symmetrization(cfg: &ExperimentConfig) -> Result<Section> {
    let sym = cfg.sym_wrapper(cfg.base_decoder()?)?;
    let r = symmetrization_experiment(&sym, &cfg.ensemble, cfg.trials.n_blocks as usize, cfg.t(), cfg.seed)?;
    let mut s = Section::new("symmetrization", &r);
    s.assert(
        5,
        "symmetrization_preserves_success",
        r.within_3se,
        format!(
            "accuracy {:.5} vs flipped {:.5}, difference {:.5} (3se = {:.5}, s = {})",
            r.inner_accuracy,
            r.flipped_accuracy,
            r.difference,
            3.0 * r.std_err,
            r.s
        ),
    );
    Ok(s)
}

pub(crate) fn bayes(cfg: &ExperimentConfig) -> Result<Section> {
    let t = &cfg.trials;
    let r = synthetic_bayes_task(t.bayes_bits, t.bayes_keys, t.bayes_train, t.bayes_test, t.bayes_margin, cfg.seed)?;
    let mut s = Section::new("bayes", &r);
    s.assert(
        9,
        "plug_in_matches_bayes",
        r.disagreement <= 0.01,
        format!(
            "disagreement {:.5} with |T| = {} ({} wrong cells of {})",
            r.disagreement,
            r.n_train,
            r.wrong_cells,
            r.bits * r.keys
        ),
    );
    Ok(s)
}

pub(crate) fn switch(cfg: &ExperimentConfig) -> Result<Section> {
    let t = cfg.t();
    let sym = cfg.sym_wrapper(cfg.base_decoder()?)?;
    let w = ErmWrapper::new(sym, cfg.wrapper.train_fraction, cfg.wrapper.seed, cfg.sils.clone())?;
    let r = switch_experiment(&w, &cfg.ensemble, t, cfg.trials.switch_tuples, cfg.seed)?;
    let mut s = Section::new("switch", &r);
    s.assert(
        9,
        "test_predictions_u_measurable",
        r.u_measurable,
        format!("{} test blocks answered from the plug-in table", r.test_blocks),
    );
    // The plug-in table fitted on the first tuple.
    let tuple = sample_tuple(t, &cfg.ensemble, cfg.seed, 0)?;
    let public: Vec<Instance> = tuple.iter().map(|b| public_view(&b.instance)).collect();
    let out = w.run(&public)?;
    s.artifacts.push(Artifact::new("table.bin", out.table.to_bytes()));
    let mut dump = serde_json::to_string_pretty(&out.table.to_json()).expect("table serializes");
    dump.push('\n');
    s.artifacts.push(Artifact::new("table.json", dump.into_bytes()));
    Ok(s)
}

pub(crate) fn self_reduction(cfg: &ExperimentConfig) -> Result<Section> {
    let p = &cfg.ensemble;
    let n = cfg.trials.self_reductions;
    let blocks = sample_blocks(p, cfg.seed, 0, n)?;
    let decider = CosetDecider {
        coset_limit: p.coset_limit,
    };
    // (matches oracle, calls)
    let rows: Vec<(bool, usize)> = blocks
        .par_iter()
        .map(|b| {
            let public = public_view(&b.instance);
            let sr = self_reduce(&public, &decider)?;
            let oracle = enumerate_on_layer(&public, p.coset_limit)?;
            Ok((oracle.len() == 1 && oracle[0] == sr.witness.x, sr.calls))
        })
        .collect::<Result<_>>()?;
    let matches = rows.iter().filter(|r| r.0).count();
    let exact_calls = rows.iter().filter(|r| r.1 == p.m).count();
    let mut s = Section::new(
        "self_reduction",
        json!({"m": p.m, "blocks": n, "matches": matches, "exact_m_calls": exact_calls}),
    );
    s.assert(8, "witness_recovered", matches == n, format!("{matches}/{n} equal the enumeration oracle"));
    s.assert(8, "m_decider_calls", exact_calls == n, format!("{exact_calls}/{n} used exactly m = {} calls", p.m));
    Ok(s)
}

pub(crate) fn product_bound(cfg: &ExperimentConfig) -> Result<Section> {
    let t = cfg.t();
    let d = cfg.base_decoder()?;
    let test = if t >= 2 {
        ErmSplit::new(t, cfg.wrapper.train_fraction, cfg.wrapper.seed)?.test
    } else {
        vec![0]
    };
    let params = ProductBoundParams {
        t,
        n_tuples: cfg.trials.n_tuples,
        test,
        pivot: cfg.trials.pivot,
        alpha: cfg.trials.alpha,
        union_t: (1..=8).map(|q| q * t).collect(),
    };
    let r = product_bound_experiment(d.as_ref(), &cfg.ensemble, &params, cfg.seed)?;
    let mut table = Table::new("per_block", &["position", "pivot_rate", "exact_rate"]);
    for (q, &j) in r.test.iter().enumerate() {
        table.push(vec![j.to_string(), fmt_f(r.per_block_rates[q]), fmt_f(r.per_block_exact_rates[q])]);
    }
    let mut union = Table::new("union_bound", &["t", "exponent"]);
    for row in &r.union_bound.rows {
        union.push(vec![row.t.to_string(), fmt_f(row.exponent)]);
    }
    let mut s = Section::new("product_bound", &r);
    s.assert(
        10,
        "joint_success_matches_product",
        r.within_3se,
        format!(
            "all-S rate {:.5} vs product {:.5} (3se = {:.5}) over {} tuples",
            r.all_s_rate,
            r.product,
            3.0 * r.std_err,
            r.n_tuples
        ),
    );
    s.assert(
        10,
        "pivot_bound",
        r.pivot_inequality_holds,
        "block-exact success implies pivot success on every sample",
    );
    s.tables.push(table);
    s.tables.push(union);
    Ok(s)
}

fn codec_blocks(m: usize, t: usize, seed: u64, run: u64) -> Result<Vec<Instance>> {
    let p = EnsembleParams::with_m(m);
    let mut rng = LabRng::for_stream(seed, tag::EXPERIMENT, run);
    (0..t).map(|_| sample_unconditioned(&p, &mut rng)).collect()
}

/// Round trip and bound checks of both codecs; returns the failures.
fn check_codecs(
    d: &dyn Decoder,
    blocks: &[Instance],
    errors: &[Vec<usize>],
    reg: &Registry,
) -> Result<Vec<String>> {
    let truths = ErrorMask { sets: errors.to_vec() }.apply(&run_decoder(d, blocks)?)?;
    let mut failures = Vec::new();
    for codec in ["coarse", "fine"] {
        let a = audit(codec, d, blocks, &truths, reg)?;
        if !a.round_trip {
            failures.push(format!("{codec}: round trip"));
        }
        if a.ledger.total as usize != a.codeword_bits || !a.ledger.is_consistent() {
            failures.push(format!("{codec}: ledger total != codeword length"));
        }
        if !a.within_bound {
            failures.push(format!("{codec}: {} > bound {}", a.ledger.total, a.lemma_bound));
        }
        if let Some(h) = a.entropy_bound {
            if a.ledger.total as f64 > h + 1e-9 {
                failures.push(format!("{codec}: {} > entropy bound {h:.1}", a.ledger.total));
            }
        }
    }
    Ok(failures)
}

/// Twenty hand-built error patterns at `m = 16`.
pub(crate) fn adversarial_patterns() -> Vec<Vec<Vec<usize>>> {
    let m = 16;
    vec![
        vec![],
        vec![vec![]],
        vec![(0..m).collect()],
        vec![vec![]; 8],
        vec![(0..m).collect(); 8],
        vec![vec![0]; 8],
        vec![vec![m - 1]; 8],
        (0..8).map(|j| if j % 2 == 0 { vec![] } else { (0..m).collect() }).collect(),
        (0..8).map(|j| if j == 0 { vec![3] } else { vec![] }).collect(),
        (0..8).map(|j| if j == 7 { vec![3] } else { vec![] }).collect(),
        (0..8).map(|j| vec![j]).collect(),
        (0..8).map(|j| (0..=j).collect()).collect(),
        (0..8).map(|j| (j..m).collect()).collect(),
        vec![(0..m).step_by(2).collect(); 8],
        vec![(1..m).step_by(2).collect(); 8],
        vec![(0..m - 1).collect(); 8],
        vec![vec![]; 63],
        vec![vec![5, 9]; 64],
        (0..33).map(|j| if j % 3 == 0 { vec![j % m] } else { vec![] }).collect(),
        (0..40).map(|j| (0..j % (m + 1)).collect()).collect(),
    ]
}

/// Every subset of `[n]` ranks into `[0, C(n, w))` bijectively and unranks back.
fn rank_bijection(n: usize) -> Result<bool> {
    let mut seen: Vec<Vec<bool>> = (0..=n)
        .map(|w| vec![false; binomial(n, w).try_into().expect("small binomial")])
        .collect();
    for mask in 0u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&b| mask >> b & 1 == 1).collect();
        let rank = binomial_rank(&set, n)?;
        let idx: usize = (&rank).try_into().expect("small rank");
        let slot = &mut seen[set.len()][idx];
        if *slot || binomial_unrank(n, set.len(), &rank)? != set {
            return Ok(false);
        }
        *slot = true;
    }
    Ok(seen.iter().flatten().all(|&b| b))
}

pub(crate) fn codec_conformance(cfg: &ExperimentConfig) -> Result<Section> {
    let reg = Registry::standard();
    let hash = LocalHash::new(cfg.sils.clone(), cfg.decoder.seed);
    let runs = cfg.trials.codec_runs;
    let random_failures: Vec<String> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = LabRng::for_stream(cfg.seed, tag::EXPERIMENT, 1 << 35 | run);
            let m = rng.gen_range(4..=20);
            let t = rng.gen_range(0..=12);
            let p = rng.gen::<f64>();
            let errors: Vec<Vec<usize>> = (0..t)
                .map(|_| {
                    if rng.gen::<f64>() < 0.4 {
                        Vec::new()
                    } else {
                        (0..m).filter(|_| rng.gen::<f64>() < p).collect()
                    }
                })
                .collect();
            let blocks = codec_blocks(m, t, cfg.seed, run)?;
            let d: &dyn Decoder = if run % 2 == 0 { &ConstantZero } else { &hash };
            Ok(check_codecs(d, &blocks, &errors, &reg)?
                .into_iter()
                .map(|f| format!("run {run}: {f}"))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let patterns = adversarial_patterns();
    let mut adversarial_failures = Vec::new();
    for (k, errors) in patterns.iter().enumerate() {
        let blocks = codec_blocks(16, errors.len(), cfg.seed, (1 << 36) + k as u64)?;
        for f in check_codecs(&ConstantZero, &blocks, errors, &reg)? {
            adversarial_failures.push(format!("pattern {k}: {f}"));
        }
    }
    let bijective = rank_bijection(12)?;
    let mut s = Section::new(
        "codec",
        json!({
            "random_runs": runs,
            "random_failures": random_failures,
            "adversarial_patterns": patterns.len(),
            "adversarial_failures": adversarial_failures,
            "rank_bijective_n12": bijective,
        }),
    );
    s.assert(
        7,
        "randomized_round_trips",
        random_failures.is_empty(),
        format!("{} failures in {runs} runs", random_failures.len()),
    );
    s.assert(
        7,
        "adversarial_round_trips",
        adversarial_failures.is_empty(),
        format!("{} failures in {} patterns", adversarial_failures.len(), patterns.len()),
    );
    s.assert(7, "rank_bijection_n12", bijective, "all 4096 subsets of [12]");
    Ok(s)
}

pub(crate) fn codec_audit(cfg: &ExperimentConfig) -> Result<Section> {
    let reg = Registry::standard();
    let d = cfg.base_decoder()?;
    let t = cfg.t();
    let runs = cfg.trials.codec_runs;
    let mut audits = Vec::with_capacity(2 * runs);
    let mut artifacts = Vec::new();
    for run in 0..runs {
        let tuple = sample_tuple(t, &cfg.ensemble, cfg.seed, (run * t) as u64)?;
        let inst: Vec<Instance> = tuple.iter().map(|b| public_view(&b.instance)).collect();
        let truths: Vec<BitVector> = tuple.iter().map(|b| b.witness.x.clone()).collect();
        for codec in ["coarse", "fine"] {
            audits.push(audit(codec, d.as_ref(), &inst, &truths, &reg)?);
        }
        if run == 0 {
            let (coarse, _) = encode_coarse(d.as_ref(), &inst, &truths)?;
            let (fine, _) = encode_fine(d.as_ref(), &inst, &truths)?;
            artifacts.push(Artifact::new("coarse.bin", coarse.bytes));
            artifacts.push(Artifact::new("fine.bin", fine.bytes));
        }
    }
    let mut table = Table::new(
        "audit",
        &["run", "codec", "t", "successes", "error_bits", "ledger_bits", "lemma_bound", "entropy_bound", "round_trip"],
    );
    for (q, a) in audits.iter().enumerate() {
        table.push(vec![
            (q / 2).to_string(),
            a.codec.clone(),
            a.t.to_string(),
            a.successes.to_string(),
            a.error_bits.to_string(),
            a.ledger.total.to_string(),
            a.lemma_bound.to_string(),
            a.entropy_bound.map(fmt_f).unwrap_or_default(),
            a.round_trip.to_string(),
        ]);
    }
    let round_trips = audits.iter().filter(|a| a.round_trip).count();
    let within = audits
        .iter()
        .filter(|a| a.within_bound && a.entropy_bound.is_none_or(|h| a.ledger.total as f64 <= h + 1e-9))
        .count();
    let n = audits.len();
    let mut s = Section::new("codec_audit", &audits);
    s.assert(7, "audit_round_trips", round_trips == n, format!("{round_trips}/{n} codewords decode exactly"));
    s.assert(7, "audit_within_bounds", within == n, format!("{within}/{n} ledgers within the lemma bounds"));
    s.tables.push(table);
    s.artifacts = artifacts;
    Ok(s)
}
