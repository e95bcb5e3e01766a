use serde_json::Value;

use super::*;
use crate::ensemble::EnsembleParams;

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        ensemble: EnsembleParams::with_m(10),
        seed: 3,
        ..ExperimentConfig::default()
    };
    c.trials.formulas = 3;
    c.trials.hash_draws = 300;
    c.trials.n_blocks = 100;
    c.trials.clash_tuples = 2;
    c.trials.clash_t_max = Some(6);
    c.decoder.train_blocks = 40;
    c.wrapper.s = Some(5);
    c
}

#[test]
fn empty_config_is_the_default() {
    let c = ExperimentConfig::from_json("{}").unwrap();
    assert_eq!(c, ExperimentConfig::default());
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
}

#[test]
fn bad_configs_name_the_field() {
    for (text, field) in [
        (r#"{"ensemble": {"m": 3}}"#, "m"),
        (r#"{"schema_version": 2}"#, "schema_version"),
        (r#"{"wrapper": {"s": 6}}"#, "wrapper.s"),
        (r#"{"wrapper": {"kappa": 0}}"#, "wrapper.kappa"),
        (r#"{"wrapper": {"train_fraction": 1.0}}"#, "wrapper.train_fraction"),
        (r#"{"trials": {"pivot": 16}}"#, "trials.pivot"),
        (r#"{"trials": {"t": 0}}"#, "trials.t"),
        (r#"{"trials": {"bayes_margin": 0.5}}"#, "trials.bayes_margin"),
        (r#"{"sils": {"rho": 3}}"#, "sils.rho"),
    ] {
        match ExperimentConfig::from_json(text) {
            Err(Error::InvalidParameter { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    let err = ExperimentConfig::from_json(r#"{"trials": {"n_block": 5}}"#).unwrap_err();
    assert!(err.to_string().contains("n_block"), "{err}");
}

#[test]
fn symmetrization_defaults_follow_m_and_t() {
    // s = ceil(20 log2 256) = 160, made odd; kappa = ceil(12 log2 256).
    let c = ExperimentConfig::default();
    assert_eq!(c.t(), 16);
    assert_eq!(c.symmetrization(), (161, 96));
    let mut c = small();
    c.wrapper.s = None;
    c.trials.t = Some(8);
    // log2 80 = 6.32...: s = ceil(126.4) = 127, kappa = ceil(75.9) = 76.
    assert_eq!(c.symmetrization(), (127, 76));
}

#[test]
fn subcommand_names_round_trip() {
    for s in Subcommand::ALL {
        assert_eq!(s.as_str().parse::<Subcommand>().unwrap(), s);
        assert_eq!(serde_json::to_value(s).unwrap(), s.as_str());
    }
    assert!("audit".parse::<Subcommand>().is_err());
}

#[test]
fn schema_matches_the_types() {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let names: Vec<&str> = schema["properties"]["subcommand"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let ours: Vec<&str> = Subcommand::ALL.iter().map(|s| s.as_str()).collect();
    assert_eq!(names, ours);
    // Every serialized config key is declared and every required key exists.
    let cfg = serde_json::to_value(ExperimentConfig::default()).unwrap();
    let defs = &schema["$defs"]["config"];
    let check = |obj: &Value, def: &Value, path: &str| {
        let props = def["properties"].as_object().unwrap();
        for k in obj.as_object().unwrap().keys() {
            assert!(props.contains_key(k), "{path}.{k} missing from schema");
        }
        for k in def["required"].as_array().into_iter().flatten() {
            assert!(obj.get(k.as_str().unwrap()).is_some(), "{path}.{k} not serialized");
        }
    };
    check(&cfg, defs, "config");
    for part in ["ensemble", "sils", "wrapper", "decoder", "trials"] {
        check(&cfg[part], &defs["properties"][part], part);
    }
}

#[test]
fn reports_are_deterministic_and_self_describing() {
    let c = small();
    let a = run(Subcommand::Isolate, &c).unwrap();
    let b = run(Subcommand::Isolate, &c).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.report.config, c);
    assert_eq!(a.report.seed, 3);
    assert!(a.report.assertions.iter().all(|x| x.criterion == 2));
    assert_eq!(a.tables[0].rows.len(), 3);
    let back: Report = serde_json::from_str(&a.report.to_json()).unwrap();
    assert_eq!(back, a.report);
}

#[test]
fn sample_emits_instance_artifacts() {
    let out = run(Subcommand::Sample, &small()).unwrap();
    assert!(out.report.passed);
    let inst = out.artifacts.iter().find(|a| a.suffix == "inst").unwrap();
    let parsed = crate::ensemble::instance_from_bytes(&inst.bytes).unwrap();
    assert_eq!(parsed.m(), 10);
    assert!(out.artifacts.iter().any(|a| a.suffix == "cnf"));
}

#[test]
fn criterion_configs_are_pinned() {
    for &(id, _) in &CRITERIA {
        for c in criterion_config(id, Scale::Full, 1) {
            c.validate().unwrap();
        }
    }
    let c1 = &criterion_config(1, Scale::Full, 1)[0];
    assert_eq!((c1.ensemble.m, c1.ensemble.alpha, c1.trials.n_blocks), (16, 4.2, 10_000));
    let c2 = &criterion_config(2, Scale::Full, 1)[0];
    assert_eq!((c2.ensemble.m, c2.trials.formulas, c2.trials.hash_draws), (14, 50, 10_000));
    let c3 = &criterion_config(3, Scale::Full, 1)[0];
    assert_eq!((c3.trials.n_blocks, c3.trials.n0), (100_000, 200));
    let c5 = &criterion_config(5, Scale::Full, 1)[0];
    assert_eq!((c5.ensemble.m, c5.trials.n_blocks), (12, 10_000));
    let c6 = &criterion_config(6, Scale::Full, 1)[0];
    assert_eq!((c6.radius(), c6.trials.tree_samples, c6.trials.sparsify_n0), (2, 10_000, 500));
    let c10 = criterion_config(10, Scale::Full, 1);
    assert_eq!(c10.len(), 2);
    assert_eq!((c10[0].ensemble.m, c10[0].t(), c10[0].trials.n_tuples), (12, 8, 10_000));
    assert_eq!(c10[1].ensemble.m, 16);
    assert!(run_criterion(11, Scale::Quick, 1).is_err());
}

#[test]
fn clash_curves_small() {
    let r = clash_demo(&small()).unwrap();
    assert_eq!(r.ts, vec![4, 5, 6]);
    assert!(r.oracle_non_control_constant);
    assert!(r.oracle_payload_zero);
    assert!(r.t0_header_only);
    assert_eq!(r.locals.len(), 4);
    // Control bits grow with t while identity and parameters do not.
    assert!(r.rows.windows(2).all(|w| w[0].oracle_non_control == w[1].oracle_non_control));
    assert!(r.best_slope > 0.0);
}

#[test]
fn unknown_decoder_is_a_config_error() {
    let mut c = small();
    c.decoder.name = "nope".into();
    assert!(matches!(run(Subcommand::CodecAudit, &c), Err(Error::InvalidParameter { .. })));
}
