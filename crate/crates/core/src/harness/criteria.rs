//! The ten acceptance criteria at pinned scale.

use serde::Serialize;
use serde_json::Value;

use super::{sections as s, clash, Assertion, ExperimentConfig, Scale, Section};
use crate::decoders::{LocalHash, LocalTable};
use crate::ensemble::{EnsembleParams, KMode};
use crate::error::Result;

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "involution suite"),
    (2, "VV isolation"),
    (3, "neutrality"),
    (4, "SILS invariance"),
    (5, "symmetrization preservation"),
    (6, "tree-likeness and sparsification trends"),
    (7, "codec conformance"),
    (8, "self-reduction"),
    (9, "ERM plug-in"),
    (10, "product bound and clash"),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub payload: Value,
}

fn pick<T>(scale: Scale, full: T, quick: T) -> T {
    match scale {
        Scale::Full => full,
        Scale::Quick => quick,
    }
}

/// The configurations criterion `id` runs with. Criterion 10 uses two:
/// the product bound at `m = 12` and the clash demo at `m = 16`.
pub fn criterion_config(id: u8, scale: Scale, seed: u64) -> Vec<ExperimentConfig> {
    let mut c = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    let t = &mut c.trials;
    match id {
        1 => t.n_blocks = pick(scale, 10_000, 500),
        2 => {
            c.ensemble = EnsembleParams::with_m(14);
            c.trials.formulas = pick(scale, 50, 10);
            c.trials.hash_draws = pick(scale, 10_000, 2_000);
        }
        3 => {
            t.n_blocks = pick(scale, 100_000, 10_000);
            t.n0 = 200;
        }
        4 => t.invariance_triples = pick(scale, 1_000, 100),
        5 => {
            c.ensemble = EnsembleParams::with_m(12);
            c.decoder.name = LocalHash::NAME.into();
            c.trials.n_blocks = pick(scale, 10_000, 1_000);
        }
        6 => {
            c.radius = Some(2);
            t.tree_m = vec![64, 512];
            t.tree_samples = pick(scale, 10_000, 2_000);
            t.tree_alpha = 1.0;
            t.tree_k_mode = KMode::Fixed;
            t.n_blocks = pick(scale, 100_000, 5_000);
            t.chart_blocks = pick(scale, 10_000, 1_000);
            t.sparsify_n0 = 500;
        }
        7 => t.codec_runs = pick(scale, 1_000, 100),
        8 => t.self_reductions = pick(scale, 1_000, 100),
        9 => {
            t.bayes_bits = 4;
            t.bayes_keys = 64;
            t.bayes_train = 100_000;
            t.bayes_test = pick(scale, 100_000, 20_000);
            t.bayes_margin = 0.05;
            t.t = Some(8);
            t.switch_tuples = pick(scale, 20, 5);
            c.ensemble = EnsembleParams::with_m(12);
        }
        10 => {
            t.t = Some(8);
            t.n_tuples = pick(scale, 10_000, 1_000);
            c.ensemble = EnsembleParams::with_m(12);
            c.decoder.name = LocalTable::NAME.into();
            let mut clash = ExperimentConfig {
                seed,
                ..ExperimentConfig::default()
            };
            clash.trials.clash_tuples = pick(scale, 30, 8);
            return vec![c, clash];
        }
        _ => {}
    }
    vec![c]
}

fn sections_for(id: u8, cfgs: &[ExperimentConfig]) -> Result<Vec<Section>> {
    let c = &cfgs[0];
    Ok(match id {
        1 => vec![s::involution_suite(c)?],
        2 => vec![s::isolation_suite(c)?],
        3 => vec![s::neutrality(c)?],
        4 => vec![s::sils_invariance(c)?],
        5 => vec![s::symmetrization(c)?],
        6 => vec![s::treelike(c)?, s::sparsify(c)?],
        7 => vec![s::codec_conformance(c)?],
        8 => vec![s::self_reduction(c)?],
        9 => vec![s::bayes(c)?, s::switch(c)?],
        10 => vec![s::product_bound(c)?, clash::clash_section(&cfgs[1])?],
        other => return Err(crate::Error::invalid("criterion", format!("{other} not in 1..=10"))),
    })
}

/// Runs criterion `id`. Only assertions tagged with `id` decide the outcome.
pub fn run_criterion(id: u8, scale: Scale, seed: u64) -> Result<CriterionOutcome> {
    let cfgs = criterion_config(id, scale, seed);
    for c in &cfgs {
        c.validate()?;
    }
    let mut payload = serde_json::Map::new();
    let mut assertions = Vec::new();
    for sec in sections_for(id, &cfgs)? {
        payload.insert(sec.name.into(), sec.payload);
        assertions.extend(sec.assertions.into_iter().filter(|a| a.criterion == id));
    }
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or_default();
    Ok(CriterionOutcome {
        id,
        name: name.into(),
        passed: !assertions.is_empty() && assertions.iter().all(|a| a.passed),
        assertions,
        payload: Value::Object(payload),
    })
}

pub(crate) fn selftest_section(cfg: &ExperimentConfig) -> Result<Section> {
    let scale = cfg.trials.selftest_scale;
    let outcomes = CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, scale, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut sec = Section::new("selftest", &outcomes);
    for o in &outcomes {
        let failed: Vec<&str> = o.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
        let detail = if failed.is_empty() {
            format!("{} assertions passed", o.assertions.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        sec.assert(o.id, &format!("criterion_{}", o.id), o.passed, detail);
    }
    Ok(sec)
}
