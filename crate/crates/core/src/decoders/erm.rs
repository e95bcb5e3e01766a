//! Plug-in (per-local-input majority) tables and the ERM wrapper.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::basic::{sils_spec_bytes, sils_spec_from};
use super::{Decoder, ParamReader, ParamWriter, Registry, SymWrapper};
use crate::codec::LedgerKind;
use crate::ensemble::{sample_tuple, EnsembleParams, Instance};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::rng::{tag, LabRng};
use crate::sils::{extract_sils, SilsSpec};
use crate::symmetry::{public_view, LocalInput};

pub const TABLE_MAGIC: &[u8; 4] = b"MSKT";
pub const TABLE_VERSION: u8 = 1;

/// Random partition `[t] = T ⊔ S`, both sides nonempty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErmSplit {
    pub t: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ErmSplit {
    pub fn new(t: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if t < 2 {
            return Err(Error::EmptyTrainingSet);
        }
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", format!("{train_fraction} not in (0, 1)")));
        }
        let n_train = ((train_fraction * t as f64).round() as usize).clamp(1, t - 1);
        let mut idx: Vec<usize> = (0..t).collect();
        idx.shuffle(&mut LabRng::for_stream(seed, tag::SPLIT, t as u64));
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self { t, seed, train, test })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Votes {
    pub zeros: u32,
    pub ones: u32,
}

impl Votes {
    /// Majority label; ties go to 0.
    pub fn label(&self) -> bool {
        self.ones > self.zeros
    }
}

/// Per-bit map `u -> votes`. Unseen keys predict 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PlugInTable {
    pub m: usize,
    pub sils: SilsSpec,
    pub entries: Vec<BTreeMap<LocalInput, Votes>>,
}

impl PlugInTable {
    pub fn new(m: usize, sils: SilsSpec) -> Self {
        Self {
            m,
            sils,
            entries: vec![BTreeMap::new(); m],
        }
    }

    pub fn add(&mut self, i: usize, key: LocalInput, label: bool) {
        let v = self.entries[i].entry(key).or_default();
        if label {
            v.ones += 1;
        } else {
            v.zeros += 1;
        }
    }

    pub fn lookup(&self, i: usize, key: &LocalInput) -> bool {
        self.entries[i].get(key).map(Votes::label).unwrap_or(false)
    }

    pub fn contains(&self, i: usize, key: &LocalInput) -> bool {
        self.entries[i].contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keys `u_{j,i}` of one block, computing its sketch once.
    pub fn keys_of(&self, inst: &Instance) -> Vec<LocalInput> {
        let z = extract_sils(&inst.cnf, &self.sils);
        (0..inst.m()).map(|i| LocalInput::of(inst, &z, i)).collect()
    }

    /// Table from `blocks[j]` labelled `labels[j]`.
    pub fn train(blocks: &[Instance], labels: &[BitVector], sils: SilsSpec) -> Result<Self> {
        let Some(m) = blocks.first().map(Instance::m) else {
            return Err(Error::EmptyTrainingSet);
        };
        if labels.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: blocks.len(),
                found: labels.len(),
            });
        }
        let mut table = Self::new(m, sils);
        let keys: Vec<Vec<LocalInput>> = blocks.par_iter().map(|b| table.keys_of(b)).collect();
        for (ks, y) in keys.into_iter().zip(labels) {
            for (i, k) in ks.into_iter().enumerate() {
                table.add(i, k, y.get(i)?);
            }
        }
        Ok(table)
    }

    pub fn predict_block(&self, inst: &Instance) -> BitVector {
        BitVector::from_bits(self.keys_of(inst).iter().enumerate().map(|(i, k)| self.lookup(i, k)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = TABLE_MAGIC.to_vec();
        out.push(TABLE_VERSION);
        out.extend((self.m as u32).to_le_bytes());
        let spec = sils_spec_bytes(&self.sils);
        out.extend((spec.len() as u32).to_le_bytes());
        out.extend(spec);
        for bit in &self.entries {
            out.extend((bit.len() as u32).to_le_bytes());
            for (k, v) in bit {
                out.extend(k.to_bytes());
                out.extend(v.zeros.to_le_bytes());
                out.extend(v.ones.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..4] != TABLE_MAGIC {
            return Err(Error::Malformed("not a plug-in table".into()));
        }
        if bytes[4] != TABLE_VERSION {
            return Err(Error::Malformed(format!("table version {}", bytes[4])));
        }
        let mut r = ParamReader::new(&bytes[5..]);
        let m = r.u32()? as usize;
        let sils = sils_spec_from(r.bytes()?)?;
        let mut table = Self::new(m, sils);
        let mut rest = &bytes[5 + 4 + 4 + sils_spec_bytes(&table.sils).len()..];
        for i in 0..m {
            let mut r = ParamReader::new(rest);
            let n = r.u32()? as usize;
            rest = &rest[4..];
            for _ in 0..n {
                let (key, used) = LocalInput::from_bytes(rest)?;
                let mut r = ParamReader::new(&rest[used..]);
                let zeros = r.u32()?;
                let ones = r.u32()?;
                rest = &rest[used + 8..];
                table.entries[i].insert(key, Votes { zeros, ones });
            }
        }
        if !rest.is_empty() {
            return Err(Error::Malformed(format!("{} trailing table bytes", rest.len())));
        }
        Ok(table)
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry {
            z: String,
            a_i: String,
            b: String,
            zeros: u32,
            ones: u32,
            label: u8,
        }
        #[derive(Serialize)]
        struct Bit {
            bit: usize,
            entries: Vec<Entry>,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            format: &'static str,
            version: u8,
            m: usize,
            sils: &'a SilsSpec,
            bits: Vec<Bit>,
        }
        let bits = self
            .entries
            .iter()
            .enumerate()
            .map(|(bit, e)| Bit {
                bit,
                entries: e
                    .iter()
                    .map(|(k, v)| Entry {
                        z: k.z.to_hex(),
                        a_i: k.a_i.to_string(),
                        b: k.b.to_string(),
                        zeros: v.zeros,
                        ones: v.ones,
                        label: v.label() as u8,
                    })
                    .collect(),
            })
            .collect();
        serde_json::to_value(Dump {
            format: "plug-in-table",
            version: TABLE_VERSION,
            m: self.m,
            sils: &self.sils,
            bits,
        })
        .expect("table dump serializes")
    }
}

/// A frozen plug-in table used as a decoder on every block.
#[derive(Clone, Debug)]
pub struct LocalTable {
    pub table: PlugInTable,
}

impl LocalTable {
    pub const NAME: &'static str = "local-table";

    pub fn from_params(p: &[u8], _: &Registry) -> Result<Box<dyn Decoder>> {
        Ok(Box::new(Self {
            table: PlugInTable::from_bytes(p)?,
        }))
    }
}

impl Decoder for LocalTable {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        self.table.to_bytes()
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        if let Some(b) = blocks.iter().find(|b| b.m() != self.table.m) {
            return Err(Error::DimensionMismatch {
                expected: self.table.m,
                found: b.m(),
            });
        }
        Ok(blocks.par_iter().map(|b| self.table.predict_block(b)).collect())
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// `W_ERM(P)`: split the tuple, label `T` with `W_sym(P)`, fit the plug-in
/// table on `T`, answer `S` from the table and `T` with `P` itself.
pub struct ErmWrapper {
    pub sym: SymWrapper,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub sils: SilsSpec,
}

#[derive(Clone, Debug)]
pub struct ErmOutcome {
    pub split: ErmSplit,
    pub table: PlugInTable,
    pub predictions: Vec<BitVector>,
}

impl ErmWrapper {
    pub const NAME: &'static str = "erm";

    pub fn new(sym: SymWrapper, train_fraction: f64, split_seed: u64, sils: SilsSpec) -> Result<Self> {
        sils.validate()?;
        ErmSplit::new(2, train_fraction, split_seed)?;
        Ok(Self {
            sym,
            train_fraction,
            split_seed,
            sils,
        })
    }

    pub fn from_params(p: &[u8], reg: &Registry) -> Result<Box<dyn Decoder>> {
        let mut r = ParamReader::new(p);
        let sym_params = r.bytes()?;
        let train_fraction = f64::from_bits(r.u64()?);
        let split_seed = r.u64()?;
        let sils = sils_spec_from(r.bytes()?)?;
        r.finish()?;
        let sym = SymWrapper::typed_from_params(sym_params, reg)?;
        Ok(Box::new(Self::new(sym, train_fraction, split_seed, sils)?))
    }

    pub fn run(&self, blocks: &[Instance]) -> Result<ErmOutcome> {
        let split = ErmSplit::new(blocks.len(), self.train_fraction, self.split_seed)?;
        let labels = self.sym.predict(blocks)?;
        let direct = self.sym.inner.predict(blocks)?;
        let train_blocks: Vec<Instance> = split.train.iter().map(|&j| blocks[j].clone()).collect();
        let train_labels: Vec<BitVector> = split.train.iter().map(|&j| labels[j].clone()).collect();
        let table = PlugInTable::train(&train_blocks, &train_labels, self.sils.clone())?;
        let mut predictions = direct;
        for &j in &split.test {
            predictions[j] = table.predict_block(&blocks[j]);
        }
        Ok(ErmOutcome {
            split,
            table,
            predictions,
        })
    }
}

impl Decoder for ErmWrapper {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        ParamWriter::new()
            .bytes(&self.sym.params())
            .u64(self.train_fraction.to_bits())
            .u64(self.split_seed)
            .bytes(&sils_spec_bytes(&self.sils))
            .finish()
    }

    fn param_split(&self) -> Vec<(&'static str, LedgerKind, u64)> {
        let total = 8 * self.params().len() as u64;
        let mut items = self.sym.param_split();
        items.push(("split seed", LedgerKind::Seed, 64));
        items.push(("split fraction", LedgerKind::Control, 64));
        let used: u64 = items.iter().map(|x| x.2).sum();
        items.push(("sketch spec and framing", LedgerKind::Parameters, total - used));
        items
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        Ok(self.run(blocks)?.predictions)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SwitchReport {
    pub m: usize,
    pub t: usize,
    pub n_tuples: usize,
    pub inner: String,
    pub s: usize,
    pub kappa: usize,
    /// `|S| / t`: the fraction of blocks answered from the table.
    pub gamma: f64,
    pub test_blocks: u64,
    /// Per-bit accuracy of `P` and of `W_ERM(P)` on test blocks.
    pub inner_bit_accuracy: f64,
    pub wrapped_bit_accuracy: f64,
    pub inner_block_rate: f64,
    pub wrapped_block_rate: f64,
    /// Test lookups whose key never occurred in training.
    pub unseen_fraction: f64,
    pub mean_table_entries: f64,
    /// Every test prediction equals the table lookup of its local input and
    /// is constant on each `(i, u)` group.
    pub u_measurable: bool,
}

/// Runs `W_ERM(P)` on `n_tuples` fresh tuples and measures the switch.
pub fn switch_experiment(
    wrapper: &ErmWrapper,
    params: &EnsembleParams,
    t: usize,
    n_tuples: usize,
    seed: u64,
) -> Result<SwitchReport> {
    struct Tally {
        test_blocks: u64,
        bits: u64,
        inner_bits: u64,
        wrapped_bits: u64,
        inner_blocks: u64,
        wrapped_blocks: u64,
        unseen: u64,
        entries: u64,
        measurable: bool,
    }
    let tallies: Vec<Tally> = (0..n_tuples as u64)
        .into_par_iter()
        .map(|n| {
            let tuple = sample_tuple(t, params, seed, n * t as u64)?;
            let public: Vec<Instance> = tuple.iter().map(|b| public_view(&b.instance)).collect();
            let out = wrapper.run(&public)?;
            let direct = wrapper.sym.inner.predict(&public)?;
            let mut tally = Tally {
                test_blocks: 0,
                bits: 0,
                inner_bits: 0,
                wrapped_bits: 0,
                inner_blocks: 0,
                wrapped_blocks: 0,
                unseen: 0,
                entries: out.table.len() as u64,
                measurable: true,
            };
            let mut seen: BTreeMap<(usize, LocalInput), bool> = BTreeMap::new();
            for &j in &out.split.test {
                let x = &tuple[j].witness.x;
                let keys = out.table.keys_of(&public[j]);
                for (i, k) in keys.into_iter().enumerate() {
                    let pred = out.predictions[j].get(i)?;
                    tally.measurable &= pred == out.table.lookup(i, &k);
                    tally.unseen += !out.table.contains(i, &k) as u64;
                    if let Some(prev) = seen.insert((i, k), pred) {
                        tally.measurable &= prev == pred;
                    }
                    tally.inner_bits += (direct[j].get(i)? == x.get(i)?) as u64;
                    tally.wrapped_bits += (pred == x.get(i)?) as u64;
                    tally.bits += 1;
                }
                tally.test_blocks += 1;
                tally.inner_blocks += (direct[j] == *x) as u64;
                tally.wrapped_blocks += (out.predictions[j] == *x) as u64;
            }
            Ok(tally)
        })
        .collect::<Result<_>>()?;
    let sum = |f: fn(&Tally) -> u64| tallies.iter().map(f).sum::<u64>();
    let bits = sum(|t| t.bits).max(1) as f64;
    let blocks = sum(|t| t.test_blocks);
    Ok(SwitchReport {
        m: params.m,
        t,
        n_tuples,
        inner: wrapper.sym.inner.id().to_string(),
        s: wrapper.sym.s,
        kappa: wrapper.sym.kappa,
        gamma: blocks as f64 / (n_tuples * t).max(1) as f64,
        test_blocks: blocks,
        inner_bit_accuracy: sum(|t| t.inner_bits) as f64 / bits,
        wrapped_bit_accuracy: sum(|t| t.wrapped_bits) as f64 / bits,
        inner_block_rate: sum(|t| t.inner_blocks) as f64 / blocks.max(1) as f64,
        wrapped_block_rate: sum(|t| t.wrapped_blocks) as f64 / blocks.max(1) as f64,
        unseen_fraction: sum(|t| t.unseen) as f64 / bits,
        mean_table_entries: sum(|t| t.entries) as f64 / n_tuples.max(1) as f64,
        u_measurable: tallies.iter().all(|t| t.measurable),
    })
}
