//! Factor graphs and truncated rooted neighborhoods.

use serde::Serialize;

use crate::ensemble::{Literal, SignedCnf};
use crate::error::{Error, Result};

/// Variable/clause incidence with literal signs.
#[derive(Clone, Debug)]
pub struct FactorGraph {
    m: usize,
    clauses: Vec<[Literal; 3]>,
    // Per variable: (clause index, sign) in clause order.
    incident: Vec<Vec<(u32, bool)>>,
}

impl FactorGraph {
    pub fn var_count(&self) -> usize {
        self.m
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn edge_count(&self) -> usize {
        self.incident.iter().map(Vec::len).sum()
    }

    pub fn clause(&self, c: usize) -> &[Literal; 3] {
        &self.clauses[c]
    }

    /// Clauses incident to variable `v`, with the sign of `v` in each.
    pub fn incident(&self, v: usize) -> &[(u32, bool)] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }
}

pub fn build_factor_graph(f: &SignedCnf) -> FactorGraph {
    let mut incident = vec![Vec::new(); f.m];
    for (c, clause) in f.clauses.iter().enumerate() {
        for l in clause {
            incident[l.var as usize].push((c as u32, l.negated));
        }
    }
    FactorGraph {
        m: f.m,
        clauses: f.clauses.clone(),
        incident,
    }
}

/// A clause of a pattern: three `(local variable, negated)` entries in the
/// clause's own literal order.
pub type PatternClause = [(u32, bool); 3];

/// Radius-`r` neighborhood of a root variable.
///
/// Local variable ids follow BFS discovery order with the root at 0, so the
/// pattern at radius `r` is a prefix of the pattern at `r + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignedRootedPattern {
    pub radius: usize,
    /// Original variable label of each local variable.
    pub vars: Vec<u32>,
    /// Variable layer of each local variable.
    pub depth: Vec<usize>,
    /// Original clause index of each local clause.
    pub clause_ids: Vec<u32>,
    pub clauses: Vec<PatternClause>,
    pub is_tree: bool,
}

impl SignedRootedPattern {
    pub fn node_count(&self) -> usize {
        self.vars.len() + self.clauses.len()
    }

    pub fn edge_count(&self) -> usize {
        3 * self.clauses.len()
    }

    /// Connected, so a tree iff `edges = nodes - 1`.
    fn tree_test(vars: usize, clauses: usize) -> bool {
        3 * clauses + 1 == vars + clauses
    }

    /// Rebuilds a pattern from explicit parts, recomputing `is_tree`.
    /// Variable 0 is the root; every variable must be reachable from it.
    pub fn from_parts(radius: usize, depth: Vec<usize>, clauses: Vec<PatternClause>) -> Result<Self> {
        let n = depth.len();
        if n == 0 || depth[0] != 0 {
            return Err(Error::Malformed("pattern needs a root at depth 0".into()));
        }
        for c in &clauses {
            if c.iter().any(|&(v, _)| v as usize >= n) {
                return Err(Error::Malformed("pattern clause names an unknown variable".into()));
            }
        }
        Ok(Self {
            radius,
            vars: (0..n as u32).collect(),
            depth,
            clause_ids: (0..clauses.len() as u32).collect(),
            is_tree: Self::tree_test(n, clauses.len()),
            clauses,
        })
    }
}

/// BFS from `root`, expanding variables on layers `< r`. Every clause touching
/// an expanded variable is taken whole, which can pull in variables at layer `r`.
pub fn extract_neighborhood(g: &FactorGraph, root: usize, r: usize) -> Result<SignedRootedPattern> {
    if root >= g.m {
        return Err(Error::IndexOutOfRange {
            index: root,
            len: g.m,
        });
    }
    let mut local = vec![u32::MAX; g.m];
    let mut clause_seen = vec![false; g.clauses.len()];
    let mut vars = vec![root as u32];
    let mut depth = vec![0];
    let mut clause_ids = Vec::new();
    let mut clauses = Vec::new();
    local[root] = 0;
    let mut head = 0;
    while head < vars.len() {
        let v = vars[head] as usize;
        let d = depth[head];
        head += 1;
        if d >= r {
            continue;
        }
        for &(c, _) in &g.incident[v] {
            let c = c as usize;
            if clause_seen[c] {
                continue;
            }
            clause_seen[c] = true;
            let mut pc = [(0u32, false); 3];
            for (slot, l) in pc.iter_mut().zip(&g.clauses[c]) {
                let u = l.var as usize;
                if local[u] == u32::MAX {
                    local[u] = vars.len() as u32;
                    vars.push(u as u32);
                    depth.push(d + 1);
                }
                *slot = (local[u], l.negated);
            }
            clause_ids.push(c as u32);
            clauses.push(pc);
        }
    }
    let is_tree = SignedRootedPattern::tree_test(vars.len(), clauses.len());
    Ok(SignedRootedPattern {
        radius: r,
        vars,
        depth,
        clause_ids,
        clauses,
        is_tree,
    })
}
