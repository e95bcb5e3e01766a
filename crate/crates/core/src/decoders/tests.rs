use super::*;
use crate::ensemble::{sample_blocks, EnsembleParams, SignedCnf, VvLayer, Witness};
use crate::gf2::BitMatrix;
use crate::hash::default_symmetrization;
use crate::sils::SilsSpec;
use crate::symmetry::{public_view, BackmapMode, LocalInput};

fn blocks(m: usize, n: usize, seed: u64) -> (Vec<Instance>, Vec<BitVector>) {
    let b = sample_blocks(&EnsembleParams::with_m(m), seed, 0, n).unwrap();
    (
        b.iter().map(|b| b.instance.clone()).collect(),
        b.iter().map(|b| b.witness.x.clone()).collect(),
    )
}

/// All solutions by a plain scan over `{0,1}^m`, checking clauses and
/// `A x = b` through the bit-vector API only.
fn enumerate(inst: &Instance) -> Vec<BitVector> {
    let m = inst.m();
    (0u64..1 << m)
        .map(|x| BitVector::from_u64(x, m))
        .filter(|x| inst.cnf.satisfied_by(x) && inst.vv.a.mat_vec_mul(x).unwrap() == inst.vv.b)
        .collect()
}

fn standard_decoders() -> Vec<Box<dyn Decoder>> {
    let hash = || Box::new(LocalHash::new(SilsSpec::default(), 3)) as Box<dyn Decoder>;
    let (bl, xs) = blocks(8, 40, 1);
    let table = PlugInTable::train(&bl, &xs, SilsSpec::default()).unwrap();
    vec![
        Box::new(ConstantZero),
        Box::new(SilsRule::new(SilsSpec::default(), 9)),
        hash(),
        Box::new(MajoritySign),
        Box::new(OracleDecoder::default()),
        Box::new(LocalTable { table }),
        Box::new(SymWrapper::new(hash(), 5, 3, 11, BackmapMode::Coordinate).unwrap()),
        Box::new(
            ErmWrapper::new(
                SymWrapper::new(hash(), 3, 2, 4, BackmapMode::Vvlabel).unwrap(),
                0.5,
                6,
                SilsSpec::default(),
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn registry_rebuilds_every_decoder() {
    let reg = Registry::standard();
    let ds = standard_decoders();
    assert_eq!(reg.names().len(), ds.len());
    let (bl, _) = blocks(8, 6, 2);
    for d in &ds {
        let again = reg.resolve(&d.id(), &d.params()).unwrap();
        assert_eq!(again.id(), d.id());
        assert_eq!(again.description_length(), d.description_length());
        assert_eq!(run_decoder(again.as_ref(), &bl).unwrap(), run_decoder(d.as_ref(), &bl).unwrap());
        let l = d.description_length();
        assert!(l.is_consistent());
        let p = d.params().len() as u64;
        assert_eq!(l.total, d.id().bits() + crate::codec::gamma_len(p + 1) as u64 + 8 * p);
    }
    assert!(matches!(reg.build("nope", &[]), Err(Error::UnknownDecoder(_))));
    let mut id = ds[0].id();
    id.digest ^= 1;
    assert!(matches!(reg.resolve(&id, &[]), Err(Error::DigestMismatch { .. })));
    assert!(reg.build(ConstantZero::NAME, &[1]).is_err());
}

#[test]
fn self_reduction_matches_enumeration() {
    let (bl, xs) = blocks(16, 120, 3);
    for (inst, x) in bl.iter().zip(&xs) {
        let sols = enumerate(inst);
        assert_eq!(sols, vec![x.clone()]);
        let r = self_reduce(&public_view(inst), &CosetDecider::default()).unwrap();
        assert_eq!(r.calls, 16);
        assert_eq!(r.witness.x, *x);
    }
}

#[test]
fn self_reduction_single_variable() {
    let cnf = SignedCnf {
        m: 1,
        clauses: Vec::new(),
    };
    let a = BitMatrix::from_rows(vec![BitVector::from_bits([true])], 1).unwrap();
    let inst = Instance::new(cnf, VvLayer::new(a, BitVector::from_bits([true])).unwrap()).unwrap();
    let r = self_reduce(&inst, &CosetDecider::default()).unwrap();
    assert_eq!(r.calls, 1);
    assert_eq!(r.witness, Witness { x: BitVector::from_bits([true]) });
}

struct Liar;

impl UsatDecider for Liar {
    fn satisfiable(&self, _: &Instance) -> Result<bool> {
        Ok(false)
    }
}

#[test]
fn lying_decider_is_reported() {
    let (bl, _) = blocks(10, 1, 4);
    assert!(matches!(
        self_reduce(&bl[0], &Liar),
        Err(Error::DeciderInconsistency { bit: 0 })
    ));
}

#[test]
fn zero_flips_reproduce_the_inner_decoder() {
    let inner = || Box::new(LocalHash::new(SilsSpec::default(), 8)) as Box<dyn Decoder>;
    let (bl, _) = blocks(10, 400, 5);
    let direct = inner().predict(&bl).unwrap();
    for s in [1, 3] {
        let w = SymWrapper::with_flips(inner(), vec![BitVector::zeros(10); s], BackmapMode::Coordinate).unwrap();
        for (tuple, want) in bl.chunks(4).zip(direct.chunks(4)) {
            assert_eq!(w.predict(tuple).unwrap(), want);
        }
    }
    assert!(SymWrapper::new(inner(), 2, 3, 0, BackmapMode::Coordinate).is_err());
}

#[test]
fn coordinate_backmap_undoes_any_flip_for_sign_readers() {
    // `majority-sign` sees flipped signs, so `P(g_σ Φ) ⊕ σ = P(Φ)` exactly.
    let (bl, _) = blocks(12, 50, 6);
    let (s, kappa) = default_symmetrization(12, 4);
    let w = SymWrapper::new(Box::new(MajoritySign), s, kappa, 2, BackmapMode::Coordinate).unwrap();
    assert_eq!(w.predict(&bl).unwrap(), MajoritySign.predict(&bl).unwrap());
}

#[test]
fn symmetrization_preserves_success() {
    let p = EnsembleParams::with_m(12);
    let (s, kappa) = default_symmetrization(12, 4);
    for inner in [
        Box::new(LocalHash::new(SilsSpec::default(), 1)) as Box<dyn Decoder>,
        Box::new(MajoritySign),
    ] {
        let w = SymWrapper::new(inner, s, kappa, 3, BackmapMode::Coordinate).unwrap();
        let r = symmetrization_experiment(&w, &p, 1500, 4, 7).unwrap();
        assert!(r.within_3se, "{r:?}");
    }
}

fn key(z: u64, bits: usize) -> LocalInput {
    LocalInput::new(
        crate::sils::SilsVector {
            bits: BitVector::from_u64(z, bits),
        },
        BitVector::zeros(2),
        BitVector::zeros(2),
    )
}

#[test]
fn table_votes_ties_and_defaults() {
    let mut t = PlugInTable::new(2, SilsSpec::default());
    for z in 0..8 {
        for _ in 0..3 {
            t.add(0, key(z, 4), z % 3 == 0);
        }
    }
    for z in 0..8 {
        assert_eq!(t.lookup(0, &key(z, 4)), z % 3 == 0);
    }
    assert!(!t.lookup(0, &key(12, 4)));
    assert!(!t.lookup(1, &key(0, 4)));
    t.add(1, key(1, 4), true);
    t.add(1, key(1, 4), false);
    assert!(!t.lookup(1, &key(1, 4)));
    let back = PlugInTable::from_bytes(&t.to_bytes()).unwrap();
    assert_eq!(back, t);
    let json = t.to_json();
    assert_eq!(json["bits"][0]["entries"].as_array().unwrap().len(), 8);
    assert!(PlugInTable::from_bytes(b"XXXX\x01").is_err());
    let mut trailing = t.to_bytes();
    trailing.push(0);
    assert!(PlugInTable::from_bytes(&trailing).is_err());
}

#[test]
fn split_partitions_the_tuple() {
    for t in 2..40 {
        let s = ErmSplit::new(t, 0.5, 9).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..t).collect::<Vec<_>>());
        assert!(!s.train.is_empty() && !s.test.is_empty());
        assert!((s.train.len() as i64 - s.test.len() as i64).abs() <= 1);
        assert_eq!(s, ErmSplit::new(t, 0.5, 9).unwrap());
    }
    assert!(matches!(ErmSplit::new(1, 0.5, 0), Err(Error::EmptyTrainingSet)));
    assert!(ErmSplit::new(4, 1.0, 0).is_err());
}

#[test]
fn erm_answers_test_blocks_from_the_table() {
    let (bl, _) = blocks(10, 12, 8);
    let sym = SymWrapper::new(Box::new(MajoritySign), 3, 2, 1, BackmapMode::Coordinate).unwrap();
    let erm = ErmWrapper::new(sym, 0.5, 3, SilsSpec::default()).unwrap();
    let out = erm.run(&bl).unwrap();
    let direct = MajoritySign.predict(&bl).unwrap();
    for &j in &out.split.train {
        assert_eq!(out.predictions[j], direct[j]);
    }
    for &j in &out.split.test {
        assert_eq!(out.predictions[j], out.table.predict_block(&bl[j]));
    }
    assert!(matches!(erm.run(&bl[..1]), Err(Error::EmptyTrainingSet)));
}

#[test]
fn deterministic_relation_is_learned_exactly() {
    // Labels are a fixed function of the local input, so every test key that
    // occurred in training is answered correctly.
    let (bl, _) = blocks(8, 300, 9);
    let rule = LocalHash::new(SilsSpec::default(), 42);
    let labels = rule.predict(&bl).unwrap();
    let table = PlugInTable::train(&bl[..200], &labels[..200], SilsSpec::default()).unwrap();
    for (b, y) in bl[200..].iter().zip(&labels[200..]) {
        for (i, k) in table.keys_of(b).iter().enumerate() {
            if table.contains(i, k) {
                assert_eq!(table.lookup(i, k), y.bit(i));
            } else {
                assert!(!table.lookup(i, k));
            }
        }
    }
    for (b, y) in bl[..200].iter().zip(&labels[..200]) {
        assert_eq!(&table.predict_block(b), y);
    }
}

#[test]
fn plug_in_matches_bayes_rule() {
    let r = synthetic_bayes_task(2, 16, 20_000, 20_000, 0.05, 1).unwrap();
    assert!(r.disagreement <= 0.01, "{r:?}");
    assert!(r.table_accuracy <= r.bayes_accuracy + 0.01);
}

#[test]
fn pivot_rates() {
    let (bl, xs) = blocks(12, 2000, 10);
    let r = pivot_success(&ConstantZero, 0, &bl, &xs).unwrap();
    assert!(r.block_rate <= r.pivot_rate);
    assert!((r.pivot_rate - 0.5).abs() <= 4.0 * 0.5 / (2000f64).sqrt(), "{r:?}");
    let r = pivot_success(&OracleDecoder::default(), 3, &bl[..60], &xs[..60]).unwrap();
    assert_eq!((r.block_rate, r.pivot_rate), (1.0, 1.0));
}

#[test]
fn product_bound_for_the_oracle_is_one() {
    let p = ProductBoundParams {
        t: 4,
        n_tuples: 20,
        test: vec![1, 3],
        pivot: 0,
        alpha: 0.001,
        union_t: vec![4, 8],
    };
    let r = product_bound_experiment(&OracleDecoder::default(), &EnsembleParams::with_m(10), &p, 2).unwrap();
    assert_eq!(r.all_s_rate, 1.0);
    assert_eq!(r.product, 1.0);
    assert_eq!(r.all_s_exact_rate, 1.0);
    assert!(r.pivot_inequality_holds && r.within_3se);
}

#[test]
fn product_bound_for_a_frozen_table() {
    let (bl, xs) = blocks(10, 300, 11);
    let table = PlugInTable::train(&bl, &xs, SilsSpec::default()).unwrap();
    let d = LocalTable { table };
    let p = ProductBoundParams {
        t: 6,
        n_tuples: 600,
        test: vec![0, 2, 4],
        pivot: 1,
        alpha: 0.001,
        union_t: vec![6],
    };
    let r = product_bound_experiment(&d, &EnsembleParams::with_m(10), &p, 12).unwrap();
    assert!(r.within_3se, "{r:?}");
    assert!(r.pivot_inequality_holds);
    assert_eq!(r.pairwise.len(), 3);
}

#[test]
fn switch_run_is_u_measurable() {
    let sym = SymWrapper::new(Box::new(LocalHash::new(SilsSpec::default(), 2)), 3, 2, 1, BackmapMode::Coordinate)
        .unwrap();
    let erm = ErmWrapper::new(sym, 0.5, 5, SilsSpec::default()).unwrap();
    let r = switch_experiment(&erm, &EnsembleParams::with_m(10), 8, 10, 3).unwrap();
    assert!(r.u_measurable);
    assert!((r.gamma - 0.5).abs() < 1e-12);
    assert_eq!(r.test_blocks, 40);
}
