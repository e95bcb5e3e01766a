//! Factor-graph neighborhoods, chart codes and the locality experiments.

mod code;
mod experiment;
mod pattern;

pub use code::{
    canonical_code, canonical_code_unsigned, canonical_sign_sequence, tree_dump, ChartKey,
};
pub use experiment::{
    sparsification_experiment, tree_likeness_experiment, GroupRow, GroupingSummary,
    ShapeSignMarginals, SparsifyReport, TreeReport,
};
pub use pattern::{
    build_factor_graph, extract_neighborhood, FactorGraph, PatternClause, SignedRootedPattern,
};

#[cfg(test)]
mod tests;
