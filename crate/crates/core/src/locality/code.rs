//! Canonical byte codes for rooted signed patterns.
//!
//! Trees get an AHU-style code: every node's children are sorted by their own
//! codes, so the result depends only on the sign-preserving rooted
//! isomorphism class. Patterns with a cycle get a distinguished prefix, node
//! counts, the root's non-backtracking unfolding and sorted per-node
//! signatures. All of those are isomorphism invariants, so equal patterns
//! always get equal codes, but two non-isomorphic cyclic patterns may collide.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pattern::SignedRootedPattern;
use crate::gf2::BitVector;

const VAR_OPEN: u8 = 0x01;
const VAR_CLOSE: u8 = 0x02;
const CLAUSE_OPEN: u8 = 0x03;
const CLAUSE_CLOSE: u8 = 0x04;
const POS: u8 = 0x10;
const NEG: u8 = 0x11;
const CYCLIC: u8 = 0xff;

struct View<'a> {
    p: &'a SignedRootedPattern,
    // Per local variable: (local clause, slot of that variable in the clause).
    incident: Vec<Vec<(usize, usize)>>,
    signed: bool,
}

impl<'a> View<'a> {
    fn new(p: &'a SignedRootedPattern, signed: bool) -> Self {
        let mut incident = vec![Vec::new(); p.vars.len()];
        for (c, clause) in p.clauses.iter().enumerate() {
            for (slot, &(v, _)) in clause.iter().enumerate() {
                incident[v as usize].push((c, slot));
            }
        }
        Self { p, incident, signed }
    }

    fn sign(&self, negated: bool) -> u8 {
        if self.signed && negated {
            NEG
        } else {
            POS
        }
    }

    /// Code of variable `v` reached through `parent` at variable layer `layer`.
    fn var_code(&self, v: usize, parent: Option<usize>, layer: usize) -> Vec<u8> {
        let mut kids: Vec<Vec<u8>> = Vec::new();
        if layer < self.p.radius {
            for &(c, slot) in &self.incident[v] {
                if Some(c) != parent {
                    kids.push(self.clause_code(c, slot, layer));
                }
            }
        }
        kids.sort_unstable();
        let mut out = vec![VAR_OPEN];
        for k in kids {
            out.extend(k);
        }
        out.push(VAR_CLOSE);
        out
    }

    fn clause_code(&self, c: usize, parent_slot: usize, layer: usize) -> Vec<u8> {
        let clause = &self.p.clauses[c];
        let mut kids: Vec<Vec<u8>> = clause
            .iter()
            .enumerate()
            .filter(|&(slot, _)| slot != parent_slot)
            .map(|(_, &(u, neg))| {
                let mut k = vec![self.sign(neg)];
                k.extend(self.var_code(u as usize, Some(c), layer + 1));
                k
            })
            .collect();
        kids.sort_unstable();
        let mut out = vec![CLAUSE_OPEN, self.sign(clause[parent_slot].1)];
        for k in kids {
            out.extend(k);
        }
        out.push(CLAUSE_CLOSE);
        out
    }

    fn cyclic_signatures(&self) -> Vec<u8> {
        let p = self.p;
        let mut var_sigs: Vec<(usize, usize)> = (0..p.vars.len())
            .map(|v| (p.depth[v], self.incident[v].len()))
            .collect();
        var_sigs.sort_unstable();
        let mut clause_sigs: Vec<[(usize, u8); 3]> = p
            .clauses
            .iter()
            .map(|c| {
                let mut s = c.map(|(v, neg)| (p.depth[v as usize], self.sign(neg)));
                s.sort_unstable();
                s
            })
            .collect();
        clause_sigs.sort_unstable();
        let mut out = Vec::new();
        for (d, deg) in var_sigs {
            out.extend((d as u32).to_le_bytes());
            out.extend((deg as u32).to_le_bytes());
        }
        for sig in clause_sigs {
            for (d, s) in sig {
                out.extend((d as u32).to_le_bytes());
                out.push(s);
            }
        }
        out
    }
}

fn code(p: &SignedRootedPattern, signed: bool) -> Vec<u8> {
    let view = View::new(p, signed);
    let unfold = view.var_code(0, None, 0);
    if p.is_tree {
        return unfold;
    }
    let mut out = vec![CYCLIC];
    out.extend((p.vars.len() as u32).to_le_bytes());
    out.extend((p.clauses.len() as u32).to_le_bytes());
    out.extend((unfold.len() as u32).to_le_bytes());
    out.extend(unfold);
    out.extend(view.cyclic_signatures());
    out
}

/// Sign-preserving canonical code.
pub fn canonical_code(p: &SignedRootedPattern) -> Vec<u8> {
    code(p, true)
}

/// Code with every edge sign erased: the unlabeled rooted shape.
pub fn canonical_code_unsigned(p: &SignedRootedPattern) -> Vec<u8> {
    code(p, false)
}

/// Edge signs of a tree pattern listed in a sign-blind canonical order:
/// children sorted by unsigned code, ties kept in discovery order. Two
/// occurrences of the same unsigned shape list corresponding edges in the
/// same positions. `None` for cyclic patterns.
pub fn canonical_sign_sequence(p: &SignedRootedPattern) -> Option<Vec<bool>> {
    if !p.is_tree {
        return None;
    }
    let view = View::new(p, false);
    let mut out = Vec::with_capacity(p.edge_count());
    fn walk_var(view: &View, v: usize, parent: Option<usize>, layer: usize, out: &mut Vec<bool>) {
        if layer >= view.p.radius {
            return;
        }
        let mut kids: Vec<(Vec<u8>, usize, usize)> = view.incident[v]
            .iter()
            .filter(|&&(c, _)| Some(c) != parent)
            .map(|&(c, slot)| (view.clause_code(c, slot, layer), c, slot))
            .collect();
        kids.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, c, slot) in kids {
            let clause = &view.p.clauses[c];
            out.push(clause[slot].1);
            let mut sub: Vec<(Vec<u8>, usize)> = (0..3)
                .filter(|&s| s != slot)
                .map(|s| (view.var_code(clause[s].0 as usize, Some(c), layer + 1), s))
                .collect();
            sub.sort_by(|a, b| a.0.cmp(&b.0));
            for (_, s) in sub {
                out.push(clause[s].1);
                walk_var(view, clause[s].0 as usize, Some(c), layer + 1, out);
            }
        }
    }
    walk_var(&view, 0, None, 0, &mut out);
    Some(out)
}

/// Indented text rendering in canonical order, one node per line.
pub fn tree_dump(p: &SignedRootedPattern) -> String {
    let view = View::new(p, true);
    let mut s = String::new();
    if !p.is_tree {
        writeln!(s, "# cyclic pattern: {} vars, {} clauses; unfolded view", p.vars.len(), p.clauses.len()).unwrap();
    }
    fn walk(view: &View, v: usize, parent: Option<usize>, layer: usize, indent: usize, s: &mut String) {
        if layer >= view.p.radius {
            return;
        }
        let mut kids: Vec<(Vec<u8>, usize, usize)> = view.incident[v]
            .iter()
            .filter(|&&(c, _)| Some(c) != parent)
            .map(|&(c, slot)| (view.clause_code(c, slot, layer), c, slot))
            .collect();
        kids.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, c, slot) in kids {
            let clause = &view.p.clauses[c];
            let sign = if clause[slot].1 { '-' } else { '+' };
            writeln!(s, "{:indent$}clause ({sign}parent)", "", indent = indent).unwrap();
            let mut sub: Vec<(Vec<u8>, usize)> = (0..3)
                .filter(|&t| t != slot)
                .map(|t| {
                    let mut k = vec![view.sign(clause[t].1)];
                    k.extend(view.var_code(clause[t].0 as usize, Some(c), layer + 1));
                    (k, t)
                })
                .collect();
            sub.sort_by(|a, b| a.0.cmp(&b.0));
            for (_, t) in sub {
                let sign = if clause[t].1 { '-' } else { '+' };
                writeln!(s, "{:indent$}{sign}var", "", indent = indent + 2).unwrap();
                walk(view, clause[t].0 as usize, Some(c), layer + 1, indent + 4, s);
            }
        }
    }
    writeln!(s, "root").unwrap();
    walk(&view, 0, None, 0, 2, &mut s);
    s
}

/// A chart: the pattern's canonical code plus the VV labels `(a_i, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChartKey {
    pub code: Vec<u8>,
    pub a_i: BitVector,
    pub b: BitVector,
}

impl ChartKey {
    pub fn new(p: &SignedRootedPattern, a_i: BitVector, b: BitVector) -> Self {
        Self {
            code: canonical_code(p),
            a_i,
            b,
        }
    }

    /// Code in hex, then the labels as bit strings.
    pub fn to_hex(&self) -> String {
        format!("{}:{}:{}", hex::encode(&self.code), self.a_i, self.b)
    }

    /// 128-bit digest for grouping without holding full codes.
    pub fn digest(&self) -> u128 {
        let mut h = Sha256::new();
        h.update((self.code.len() as u64).to_le_bytes());
        h.update(&self.code);
        h.update(self.a_i.to_bytes());
        h.update(self.b.to_bytes());
        u128::from_le_bytes(h.finalize()[..16].try_into().unwrap())
    }
}
