//! Configuration, experiment dispatch, acceptance criteria and reports.

mod clash;
mod config;
mod criteria;
mod sections;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use clash::{clash_demo, ClashReport, ClashRow};
pub use config::{DecoderConfig, ExperimentConfig, Scale, TrialConfig, WrapperConfig, SCHEMA_VERSION};
pub use criteria::{criterion_config, run_criterion, CriterionOutcome, CRITERIA};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The published report schema, also shipped as `schemas/report.schema.json`.
pub const REPORT_SCHEMA: &str = include_str!("../../../../schemas/report.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Sample,
    Neutrality,
    Sparsify,
    Treelike,
    Isolate,
    Switch,
    Success,
    Codec,
    CodecAudit,
    Clash,
    Selftest,
}

impl Subcommand {
    pub const ALL: [Subcommand; 11] = [
        Subcommand::Sample,
        Subcommand::Neutrality,
        Subcommand::Sparsify,
        Subcommand::Treelike,
        Subcommand::Isolate,
        Subcommand::Switch,
        Subcommand::Success,
        Subcommand::Codec,
        Subcommand::CodecAudit,
        Subcommand::Clash,
        Subcommand::Selftest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Sample => "sample",
            Subcommand::Neutrality => "neutrality",
            Subcommand::Sparsify => "sparsify",
            Subcommand::Treelike => "treelike",
            Subcommand::Isolate => "isolate",
            Subcommand::Switch => "switch",
            Subcommand::Success => "success",
            Subcommand::Codec => "codec",
            Subcommand::CodecAudit => "codec-audit",
            Subcommand::Clash => "clash",
            Subcommand::Selftest => "selftest",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid("subcommand", format!("unknown subcommand {s:?}")))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// Acceptance criterion this assertion belongs to.
    pub criterion: u8,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(criterion: u8, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            criterion,
            passed,
            detail: detail.into(),
        }
    }
}

/// Self-describing run record. Contains no wall-clock data, so identical
/// `(config, seed, version)` give byte-identical JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub artifact_version: String,
    pub subcommand: Subcommand,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub payload: Value,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// A binary or text file emitted next to the report, named by suffix.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub suffix: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(suffix: &str, bytes: Vec<u8>) -> Self {
        Self {
            suffix: suffix.into(),
            bytes,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub tables: Vec<Table>,
    pub artifacts: Vec<Artifact>,
}

/// One experiment's contribution to a report.
#[derive(Debug, Default)]
pub(crate) struct Section {
    pub name: &'static str,
    pub payload: Value,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<Table>,
    pub artifacts: Vec<Artifact>,
}

impl Section {
    pub fn new(name: &'static str, payload: impl Serialize) -> Self {
        Self {
            name,
            payload: serde_json::to_value(payload).expect("payload serializes"),
            ..Self::default()
        }
    }

    pub fn assert(&mut self, criterion: u8, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(criterion, name, passed, detail));
    }
}

fn assemble(sub: Subcommand, cfg: &ExperimentConfig, sections: Vec<Section>) -> RunOutput {
    let mut payload = serde_json::Map::new();
    let mut assertions = Vec::new();
    let mut tables = Vec::new();
    let mut artifacts = Vec::new();
    for s in sections {
        payload.insert(s.name.into(), s.payload);
        assertions.extend(s.assertions);
        tables.extend(s.tables);
        artifacts.extend(s.artifacts);
    }
    let passed = assertions.iter().all(|a| a.passed);
    RunOutput {
        report: Report {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.into(),
            subcommand: sub,
            seed: cfg.seed,
            config: cfg.clone(),
            payload: Value::Object(payload),
            assertions,
            passed,
        },
        tables,
        artifacts,
    }
}

/// Runs one subcommand. Errors are configuration or budget failures;
/// failed assertions are reported in the output, not as errors.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    use sections as s;
    let sections = match sub {
        Subcommand::Sample => vec![s::involution_suite(cfg)?],
        Subcommand::Isolate => vec![s::isolation_suite(cfg)?],
        Subcommand::Neutrality => vec![s::neutrality(cfg)?, s::sils_invariance(cfg)?],
        Subcommand::Sparsify => vec![s::sparsify(cfg)?],
        Subcommand::Treelike => vec![s::treelike(cfg)?],
        Subcommand::Switch => vec![s::symmetrization(cfg)?, s::bayes(cfg)?, s::switch(cfg)?],
        Subcommand::Success => vec![s::self_reduction(cfg)?, s::product_bound(cfg)?],
        Subcommand::Codec => vec![s::codec_conformance(cfg)?],
        Subcommand::CodecAudit => vec![s::codec_audit(cfg)?],
        Subcommand::Clash => vec![clash::clash_section(cfg)?],
        Subcommand::Selftest => vec![criteria::selftest_section(cfg)?],
    };
    Ok(assemble(sub, cfg, sections))
}

#[cfg(test)]
mod tests;
