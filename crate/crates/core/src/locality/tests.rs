use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::*;
use crate::ensemble::{apply_mask, sample_base_cnf, EnsembleParams, KMode, Literal, Mask, SignedCnf};
use crate::rng::LabRng;
use crate::sils::SilsSpec;

fn lit(v: u32, neg: bool) -> Literal {
    Literal::new(v, neg)
}

fn random_signed(m: usize, n_clauses: usize, rng: &mut LabRng) -> SignedCnf {
    let clauses = (0..n_clauses)
        .map(|_| {
            let mut vs: Vec<u32> = (0..m as u32).collect();
            vs.shuffle(rng);
            [lit(vs[0], rng.gen()), lit(vs[1], rng.gen()), lit(vs[2], rng.gen())]
        })
        .collect();
    SignedCnf { m, clauses }
}

#[test]
fn factor_graph_edges() {
    let empty = build_factor_graph(&SignedCnf { m: 5, clauses: vec![] });
    assert_eq!(empty.clause_count(), 0);
    assert_eq!(empty.edge_count(), 0);
    let one = build_factor_graph(&SignedCnf {
        m: 5,
        clauses: vec![[lit(0, false), lit(3, true), lit(4, false)]],
    });
    assert_eq!(one.edge_count(), 3);
    assert_eq!(one.incident(3), &[(0, true)]);
    let mut rng = LabRng::new(1, 0);
    for _ in 0..50 {
        let f = random_signed(10, rng.gen_range(0..40), &mut rng);
        assert_eq!(build_factor_graph(&f).edge_count(), 3 * f.clause_count());
    }
}

#[test]
fn radius_zero_and_isolated_roots() {
    let f = SignedCnf {
        m: 6,
        clauses: vec![[lit(0, false), lit(1, false), lit(2, true)]],
    };
    let g = build_factor_graph(&f);
    let p = extract_neighborhood(&g, 0, 0).unwrap();
    assert_eq!(p.node_count(), 1);
    assert!(p.is_tree);
    for r in 0..4 {
        let p = extract_neighborhood(&g, 5, r).unwrap();
        assert_eq!(p.node_count(), 1);
        assert!(p.is_tree);
    }
    assert!(extract_neighborhood(&g, 6, 1).is_err());
}

/// Independent oracle: recursive DFS with depth relaxation, then a
/// union-find pass for cycle detection.
fn dfs_oracle(f: &SignedCnf, root: usize, r: usize) -> (usize, usize, bool) {
    fn visit(f: &SignedCnf, v: usize, d: usize, r: usize, best: &mut Vec<usize>) {
        if d >= best[v] {
            return;
        }
        best[v] = d;
        if d == r {
            return;
        }
        for c in &f.clauses {
            if c.iter().any(|l| l.var as usize == v) {
                for l in c {
                    visit(f, l.var as usize, d + 1, r, best);
                }
            }
        }
    }
    let mut best = vec![usize::MAX; f.m];
    visit(f, root, 0, r, &mut best);
    let vars: Vec<usize> = (0..f.m).filter(|&v| best[v] <= r).collect();
    let clauses: Vec<&[Literal; 3]> = f
        .clauses
        .iter()
        .filter(|c| c.iter().any(|l| best[l.var as usize] < r))
        .collect();
    // Union-find over variable nodes 0..m and clause nodes m..m+C.
    let mut parent: Vec<usize> = (0..f.m + clauses.len()).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let root = find(p, p[x]);
            p[x] = root;
        }
        p[x]
    }
    let mut acyclic = true;
    for (ci, c) in clauses.iter().enumerate() {
        for l in c.iter() {
            let a = find(&mut parent, l.var as usize);
            let b = find(&mut parent, f.m + ci);
            if a == b {
                acyclic = false;
            } else {
                parent[a] = b;
            }
        }
    }
    (vars.len(), clauses.len(), acyclic)
}

#[test]
fn neighborhood_matches_dfs_oracle() {
    let mut rng = LabRng::new(2, 0);
    let mut trees = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(4..30);
        let n_clauses = rng.gen_range(0..2 * m);
        let f = random_signed(m, n_clauses, &mut rng);
        let root = rng.gen_range(0..m);
        let r = rng.gen_range(0..4);
        let p = extract_neighborhood(&build_factor_graph(&f), root, r).unwrap();
        let (v, c, acyclic) = dfs_oracle(&f, root, r);
        assert_eq!(p.vars.len(), v);
        assert_eq!(p.clauses.len(), c);
        assert_eq!(p.node_count(), v + c);
        assert_eq!(p.is_tree, acyclic);
        trees += p.is_tree as usize;
    }
    assert!(trees > 100 && trees < 1000, "both kinds exercised: {trees}");
}

#[test]
fn radius_r_is_prefix_of_radius_r_plus_one() {
    let mut rng = LabRng::new(3, 0);
    for _ in 0..200 {
        let f = random_signed(20, rng.gen_range(5..40), &mut rng);
        let g = build_factor_graph(&f);
        let root = rng.gen_range(0..20);
        for r in 0..4 {
            let a = extract_neighborhood(&g, root, r).unwrap();
            let b = extract_neighborhood(&g, root, r + 1).unwrap();
            assert_eq!(a.vars[..], b.vars[..a.vars.len()]);
            assert_eq!(a.depth[..], b.depth[..a.depth.len()]);
            assert_eq!(a.clauses[..], b.clauses[..a.clauses.len()]);
        }
    }
}

/// Renames variables, shuffles clause order and literal order inside clauses.
fn relabel(f: &SignedCnf, rng: &mut LabRng) -> (SignedCnf, Vec<u32>) {
    let mut pi: Vec<u32> = (0..f.m as u32).collect();
    pi.shuffle(rng);
    let mut clauses: Vec<[Literal; 3]> = f
        .clauses
        .iter()
        .map(|c| {
            let mut c = c.map(|l| lit(pi[l.var as usize], l.negated));
            c.shuffle(rng);
            c
        })
        .collect();
    clauses.shuffle(rng);
    (SignedCnf { m: f.m, clauses }, pi)
}

#[test]
fn codes_invariant_under_relabeling() {
    let mut rng = LabRng::new(4, 0);
    let mut cyclic = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(6..24);
        let f = random_signed(m, rng.gen_range(1..2 * m), &mut rng);
        let (g2, pi) = relabel(&f, &mut rng);
        let root = rng.gen_range(0..m);
        let r = rng.gen_range(1..3);
        let p = extract_neighborhood(&build_factor_graph(&f), root, r).unwrap();
        let q = extract_neighborhood(&build_factor_graph(&g2), pi[root] as usize, r).unwrap();
        assert_eq!(canonical_code(&p), canonical_code(&q));
        assert_eq!(canonical_code_unsigned(&p), canonical_code_unsigned(&q));
        assert_eq!(p.is_tree, q.is_tree);
        cyclic += !p.is_tree as usize;
    }
    assert!(cyclic > 50, "cyclic patterns exercised: {cyclic}");
}

#[test]
fn flipping_one_sign_changes_the_code() {
    let f = SignedCnf {
        m: 5,
        clauses: vec![
            [lit(0, false), lit(1, false), lit(2, false)],
            [lit(2, false), lit(3, true), lit(4, false)],
        ],
    };
    let p = extract_neighborhood(&build_factor_graph(&f), 0, 2).unwrap();
    assert!(p.is_tree);
    let base = canonical_code(&p);
    for c in 0..2 {
        for s in 0..3 {
            let mut g = f.clone();
            g.clauses[c][s].negated ^= true;
            let q = extract_neighborhood(&build_factor_graph(&g), 0, 2).unwrap();
            assert_ne!(canonical_code(&q), base, "flip at clause {c} slot {s}");
            assert_eq!(canonical_code_unsigned(&q), canonical_code_unsigned(&p));
        }
    }
}

/// Brute-force sign-preserving rooted isomorphism: try every variable
/// bijection fixing the root, compare clause multisets.
fn isomorphic(p: &SignedRootedPattern, q: &SignedRootedPattern) -> bool {
    if p.vars.len() != q.vars.len() || p.clauses.len() != q.clauses.len() {
        return false;
    }
    let n = p.vars.len();
    let canon = |cl: &[PatternClause], map: &[u32]| {
        let mut out: Vec<Vec<(u32, bool)>> = cl
            .iter()
            .map(|c| {
                let mut c: Vec<(u32, bool)> = c.iter().map(|&(v, s)| (map[v as usize], s)).collect();
                c.sort();
                c
            })
            .collect();
        out.sort();
        out
    };
    let id: Vec<u32> = (0..n as u32).collect();
    let target = canon(&q.clauses, &id);
    let mut rest: Vec<u32> = (1..n as u32).collect();
    fn permute(k: usize, rest: &mut Vec<u32>, f: &mut dyn FnMut(&[u32]) -> bool) -> bool {
        if k == rest.len() {
            return f(rest);
        }
        for j in k..rest.len() {
            rest.swap(k, j);
            if permute(k + 1, rest, f) {
                return true;
            }
            rest.swap(k, j);
        }
        false
    }
    permute(0, &mut rest, &mut |perm| {
        let mut map = vec![0u32];
        map.extend_from_slice(perm);
        canon(&p.clauses, &map) == target
    })
}

#[test]
fn tree_codes_injective_up_to_seven_nodes() {
    // Every signed CNF with at most two clauses over five variables, rooted at
    // variable 0, at radius 1 and 2. Tree patterns here have 1, 4 or 7 nodes.
    let mut signed_clauses = Vec::new();
    for a in 0..5u32 {
        for b in a + 1..5 {
            for c in b + 1..5 {
                for s in 0..8u8 {
                    signed_clauses.push([lit(a, s & 1 == 1), lit(b, s & 2 == 2), lit(c, s & 4 == 4)]);
                }
            }
        }
    }
    let mut formulas = vec![vec![]];
    for (x, c1) in signed_clauses.iter().enumerate() {
        formulas.push(vec![*c1]);
        for c2 in &signed_clauses[x + 1..] {
            formulas.push(vec![*c1, *c2]);
        }
    }
    let mut classes: BTreeMap<Vec<u8>, Vec<SignedRootedPattern>> = BTreeMap::new();
    let mut seen = 0;
    for clauses in formulas {
        let f = SignedCnf { m: 5, clauses };
        let g = build_factor_graph(&f);
        for r in 1..=2 {
            let p = extract_neighborhood(&g, 0, r).unwrap();
            if !p.is_tree || p.node_count() > 7 {
                continue;
            }
            seen += 1;
            let bucket = classes.entry(canonical_code(&p)).or_default();
            if bucket.len() < 4 {
                bucket.push(p);
            }
        }
    }
    eprintln!("{seen} tree patterns, {} classes", classes.len());
    assert!(seen > 3000);
    let reps: Vec<&SignedRootedPattern> = classes.values().map(|b| &b[0]).collect();
    for b in classes.values() {
        for p in &b[1..] {
            assert!(isomorphic(&b[0], p), "equal codes on non-isomorphic trees");
        }
    }
    for (x, p) in reps.iter().enumerate() {
        for q in &reps[x + 1..] {
            assert!(!isomorphic(p, q), "distinct codes on isomorphic trees");
        }
    }
    // 1 empty + 4 one-clause sign classes + two-clause shapes: a sanity floor.
    assert!(classes.len() > 20, "{} classes", classes.len());
}

#[test]
fn chart_keys_compare_labels() {
    let f = SignedCnf {
        m: 4,
        clauses: vec![[lit(0, false), lit(1, true), lit(2, false)]],
    };
    let p = extract_neighborhood(&build_factor_graph(&f), 0, 1).unwrap();
    let a = crate::gf2::BitVector::from_u64(0b01, 2);
    let b = crate::gf2::BitVector::from_u64(0b10, 2);
    let k1 = ChartKey::new(&p, a.clone(), b.clone());
    let k2 = ChartKey::new(&p, a.clone(), a.clone());
    assert_ne!(k1, k2);
    assert_ne!(k1.digest(), k2.digest());
    assert_eq!(k1, ChartKey::new(&p, a, b));
    assert!(k1.to_hex().ends_with(":10:01"));
    let dump = tree_dump(&p);
    assert!(dump.starts_with("root\n"));
    assert_eq!(dump.lines().count(), 4);
}

#[test]
fn tree_fraction_at_radius_zero_is_one() {
    let p = EnsembleParams {
        k_mode: KMode::Fixed,
        ..EnsembleParams::with_m(32)
    };
    let rep = tree_likeness_experiment(&p, 0, 200, 1).unwrap();
    assert_eq!(rep.tree_fraction, 1.0);
}

#[test]
fn edge_signs_are_fair_given_the_shape() {
    // Sparse enough that small trees dominate.
    let p = EnsembleParams {
        alpha: 0.5,
        k_mode: KMode::Fixed,
        ..EnsembleParams::with_m(200)
    };
    let rep = tree_likeness_experiment(&p, 1, 4000, 2).unwrap();
    let sm = rep.sign_marginals.expect("some tree shape");
    assert!(sm.occurrences >= 1000, "{}", sm.occurrences);
    assert!(sm.edges > 0);
    assert!(sm.within_band, "{sm:?}");
}

#[test]
fn tree_fraction_rises_with_m_at_low_density() {
    let base = EnsembleParams {
        alpha: 1.0,
        k_mode: KMode::Fixed,
        ..EnsembleParams::default()
    };
    let small = tree_likeness_experiment(&EnsembleParams { m: 64, ..base.clone() }, 2, 2000, 3).unwrap();
    let large = tree_likeness_experiment(&EnsembleParams { m: 512, ..base }, 2, 2000, 3).unwrap();
    assert!(large.tree_fraction > small.tree_fraction);
}

#[test]
fn small_group_mass_shrinks_with_n() {
    let p = EnsembleParams {
        alpha: 4.2,
        c1: 1.2,
        k_mode: KMode::Fixed,
        ..EnsembleParams::with_m(6)
    };
    assert_eq!(p.fixed_k(), 3);
    let sils = SilsSpec::constant();
    let a = sparsification_experiment(&p, &sils, None, 200, 0, 50, 9).unwrap();
    let b = sparsification_experiment(&p, &sils, None, 2000, 0, 50, 9).unwrap();
    assert!(b.by_local_input.small_group_mass < a.by_local_input.small_group_mass);
    assert!(b.by_local_input.groups_at_least_n0 > 0);
    assert!(b.passed, "{:?}", b.by_local_input.flagged);
}

#[test]
fn masked_copies_share_unsigned_shapes() {
    let p = EnsembleParams::with_m(16);
    let mut rng = LabRng::new(7, 0);
    let f = sample_base_cnf(&p, &mut rng).unwrap();
    let h1 = Mask::random(16, &mut rng);
    let h2 = Mask::random(16, &mut rng);
    let f1 = apply_mask(&f, &h1).unwrap();
    let f2 = apply_mask(&f, &h2).unwrap();
    for j in 0..16 {
        let p1 = extract_neighborhood(&build_factor_graph(&f1), h1.pi()[j] as usize, 1).unwrap();
        let p2 = extract_neighborhood(&build_factor_graph(&f2), h2.pi()[j] as usize, 1).unwrap();
        assert_eq!(canonical_code_unsigned(&p1), canonical_code_unsigned(&p2));
    }
}
