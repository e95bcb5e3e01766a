use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoders::{
    ConstantZero, Decoder, LocalHash, LocalTable, MajoritySign, OracleDecoder, PlugInTable, SilsRule,
    SymWrapper,
};
use crate::ensemble::{EnsembleParams, KMode};
use crate::error::{Error, Result};
use crate::hash::default_symmetrization;
use crate::sils::SilsSpec;
use crate::symmetry::BackmapMode;

pub const SCHEMA_VERSION: u32 = 1;

/// Trial counts used by `selftest`: the pinned acceptance scale or a
/// reduced one for smoke runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Quick,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WrapperConfig {
    /// Flip count; `None` means `ceil(20 log2(m t))` made odd.
    pub s: Option<usize>,
    /// Independence; `None` means `ceil(12 log2(m t))`.
    pub kappa: Option<usize>,
    pub train_fraction: f64,
    pub backmap: BackmapMode,
    pub seed: u64,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        Self {
            s: None,
            kappa: None,
            train_fraction: 0.5,
            backmap: BackmapMode::Coordinate,
            seed: 0x5157,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Registry name: constant-zero, sils-rule, local-hash, majority-sign,
    /// oracle, or local-table (trained on a separate sample).
    pub name: String,
    pub seed: u64,
    /// Blocks used to train `local-table`.
    pub train_blocks: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            name: LocalHash::NAME.into(),
            seed: 0xdec0,
            train_blocks: 2000,
        }
    }
}

/// Trial counts for every subcommand. Defaults are desk-scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub n_blocks: u64,
    pub n_tuples: usize,
    /// Tuple length; `None` means `round(c4 m)`.
    pub t: Option<usize>,
    pub n0: u64,
    pub sparsify_n0: u64,
    pub chart_blocks: u64,
    pub formulas: usize,
    pub hash_draws: u64,
    pub tree_samples: u64,
    pub tree_m: Vec<usize>,
    pub tree_alpha: f64,
    pub tree_k_mode: KMode,
    pub invariance_triples: usize,
    pub codec_runs: usize,
    pub self_reductions: usize,
    pub pivot: usize,
    pub alpha: f64,
    pub bayes_bits: usize,
    pub bayes_keys: usize,
    pub bayes_train: usize,
    pub bayes_test: usize,
    pub bayes_margin: f64,
    pub switch_tuples: usize,
    /// Tuples per `t` in the clash demo.
    pub clash_tuples: usize,
    /// Largest clash `t`; `None` means `round(c4 m)`.
    pub clash_t_max: Option<usize>,
    pub selftest_scale: Scale,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            n_blocks: 2000,
            n_tuples: 500,
            t: None,
            n0: 200,
            sparsify_n0: 500,
            chart_blocks: 2000,
            formulas: 10,
            hash_draws: 2000,
            tree_samples: 2000,
            tree_m: vec![64, 512],
            tree_alpha: 1.0,
            tree_k_mode: KMode::Fixed,
            invariance_triples: 200,
            codec_runs: 100,
            self_reductions: 100,
            pivot: 0,
            alpha: 0.001,
            bayes_bits: 4,
            bayes_keys: 64,
            bayes_train: 20_000,
            bayes_test: 20_000,
            bayes_margin: 0.05,
            switch_tuples: 10,
            clash_tuples: 10,
            clash_t_max: None,
            selftest_scale: Scale::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub ensemble: EnsembleParams,
    pub sils: SilsSpec,
    /// Chart radius; `None` means `max(1, round(c3 log2 m))`.
    pub radius: Option<usize>,
    pub wrapper: WrapperConfig,
    pub decoder: DecoderConfig,
    pub trials: TrialConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            ensemble: EnsembleParams::default(),
            sils: SilsSpec::default(),
            radius: None,
            wrapper: WrapperConfig::default(),
            decoder: DecoderConfig::default(),
            trials: TrialConfig::default(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("{} (this build reads {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.ensemble.validate()?;
        self.sils.validate()?;
        let w = &self.wrapper;
        if let Some(s) = w.s {
            if s == 0 || s % 2 == 0 {
                return Err(Error::invalid("wrapper.s", format!("{s} must be odd and positive")));
            }
        }
        if w.kappa == Some(0) {
            return Err(Error::invalid("wrapper.kappa", "must be positive"));
        }
        if !(w.train_fraction > 0.0 && w.train_fraction < 1.0) {
            return Err(Error::invalid("wrapper.train_fraction", "must lie in (0, 1)"));
        }
        if self.trials.pivot >= self.ensemble.m {
            return Err(Error::invalid("trials.pivot", "must be below m"));
        }
        if self.t() == 0 {
            return Err(Error::invalid("trials.t", "tuple length must be positive"));
        }
        if !(self.trials.alpha > 0.0 && self.trials.alpha < 1.0) {
            return Err(Error::invalid("trials.alpha", "must lie in (0, 1)"));
        }
        if !(0.0..0.5).contains(&self.trials.bayes_margin) {
            return Err(Error::invalid("trials.bayes_margin", "must lie in [0, 1/2)"));
        }
        if self.trials.tree_m.iter().any(|&m| m < 4) {
            return Err(Error::invalid("trials.tree_m", "every m must be at least 4"));
        }
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.trials.t.unwrap_or_else(|| self.ensemble.default_t())
    }

    pub fn radius(&self) -> usize {
        self.radius.unwrap_or_else(|| self.ensemble.default_radius())
    }

    /// `(s, κ)` with the defaults filled in for this `m` and `t`.
    pub fn symmetrization(&self) -> (usize, usize) {
        let (s, k) = default_symmetrization(self.ensemble.m, self.t());
        (self.wrapper.s.unwrap_or(s), self.wrapper.kappa.unwrap_or(k))
    }

    /// The base decoder named in the config. `local-table` is trained on
    /// blocks from a stream disjoint from every experiment stream.
    pub fn base_decoder(&self) -> Result<Box<dyn Decoder>> {
        let d = &self.decoder;
        Ok(match d.name.as_str() {
            n if n == ConstantZero::NAME => Box::new(ConstantZero),
            n if n == SilsRule::NAME => Box::new(SilsRule::new(self.sils.clone(), d.seed)),
            n if n == LocalHash::NAME => Box::new(LocalHash::new(self.sils.clone(), d.seed)),
            n if n == MajoritySign::NAME => Box::new(MajoritySign),
            n if n == OracleDecoder::NAME => Box::new(OracleDecoder::default()),
            n if n == LocalTable::NAME => Box::new(self.trained_table()?),
            other => return Err(Error::invalid("decoder.name", format!("unknown decoder {other:?}"))),
        })
    }

    pub fn sym_wrapper(&self, inner: Box<dyn Decoder>) -> Result<SymWrapper> {
        let (s, kappa) = self.symmetrization();
        SymWrapper::new(inner, s, kappa, self.wrapper.seed, self.wrapper.backmap)
    }

    /// A frozen plug-in table labelled by `W_sym(local-hash)` on training blocks.
    pub fn trained_table(&self) -> Result<LocalTable> {
        use crate::decoders::run_decoder;
        use crate::ensemble::{sample_blocks, Instance};
        use crate::rng::{tag, LabRng};
        let seed = LabRng::for_stream(self.seed, tag::TRAINING, 0).child_seed();
        let blocks = sample_blocks(&self.ensemble, seed, 0, self.decoder.train_blocks)?;
        let inst: Vec<Instance> = blocks.iter().map(|b| b.instance.clone()).collect();
        let sym = self.sym_wrapper(Box::new(LocalHash::new(self.sils.clone(), self.decoder.seed)))?;
        let t = self.t();
        let mut labels = Vec::with_capacity(inst.len());
        for chunk in inst.chunks(t) {
            labels.extend(run_decoder(&sym, chunk)?);
        }
        Ok(LocalTable {
            table: PlugInTable::train(&inst, &labels, self.sils.clone())?,
        })
    }
}
