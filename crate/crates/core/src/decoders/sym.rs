use super::{read_inner, write_inner, Decoder, ParamReader, ParamWriter, Registry};
use crate::codec::LedgerKind;
use crate::ensemble::Instance;
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::hash::SignFlipFamily;
use crate::symmetry::{back_map, flip_public, BackmapMode};

/// `W_sym(P)`: runs `P` on `s` sign-flipped copies of the tuple (one flip
/// `σ^(r)` shared by all blocks of copy `r`), back-maps each output bit and
/// takes the per-bit majority.
pub struct SymWrapper {
    pub inner: Box<dyn Decoder>,
    pub s: usize,
    pub kappa: usize,
    pub seed: u64,
    pub mode: BackmapMode,
    /// Explicit flips replacing the κ-wise family; used by tests.
    pub forced: Option<Vec<BitVector>>,
}

impl SymWrapper {
    pub const NAME: &'static str = "sym";

    pub fn new(inner: Box<dyn Decoder>, s: usize, kappa: usize, seed: u64, mode: BackmapMode) -> Result<Self> {
        if s == 0 || s % 2 == 0 {
            return Err(Error::invalid("s", format!("{s} must be odd and positive")));
        }
        if kappa == 0 {
            return Err(Error::invalid("kappa", "must be positive"));
        }
        Ok(Self {
            inner,
            s,
            kappa,
            seed,
            mode,
            forced: None,
        })
    }

    pub fn with_flips(inner: Box<dyn Decoder>, flips: Vec<BitVector>, mode: BackmapMode) -> Result<Self> {
        let mut w = Self::new(inner, flips.len(), 1, 0, mode)?;
        w.forced = Some(flips);
        Ok(w)
    }

    pub fn from_params(p: &[u8], reg: &Registry) -> Result<Box<dyn Decoder>> {
        Ok(Box::new(Self::typed_from_params(p, reg)?))
    }

    pub fn typed_from_params(p: &[u8], reg: &Registry) -> Result<Self> {
        let mut r = ParamReader::new(p);
        let inner = read_inner(&mut r, reg)?;
        let s = r.u32()? as usize;
        let kappa = r.u32()? as usize;
        let seed = r.u64()?;
        let mode = match r.u8()? {
            0 => BackmapMode::Coordinate,
            1 => BackmapMode::Vvlabel,
            other => return Err(Error::Malformed(format!("backmap tag {other}"))),
        };
        let forced = match r.u8()? {
            0 => None,
            _ => {
                let n = r.u32()? as usize;
                let mut flips = Vec::with_capacity(n);
                for _ in 0..n {
                    flips.push(BitVector::from_bytes(r.bytes()?)?.0);
                }
                Some(flips)
            }
        };
        r.finish()?;
        let mut w = Self::new(inner, s, kappa, seed, mode)?;
        w.forced = forced;
        Ok(w)
    }

    pub fn flips(&self, m: usize) -> Result<Vec<BitVector>> {
        if let Some(f) = &self.forced {
            if let Some(bad) = f.iter().find(|s| s.len() != m) {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: bad.len(),
                });
            }
            return Ok(f.clone());
        }
        let family = SignFlipFamily::new(self.kappa, m, self.seed)?;
        Ok((0..self.s as u64).map(|r| family.draw(r)).collect())
    }

    /// `Y^(r)_j` for every flip `r` and block `j`.
    pub fn backmapped_runs(&self, blocks: &[Instance]) -> Result<Vec<Vec<BitVector>>> {
        let Some(m) = blocks.first().map(Instance::m) else {
            return Ok(vec![Vec::new(); self.s]);
        };
        if blocks.iter().any(|b| b.m() != m) {
            return Err(Error::invalid("blocks", "mixed m within a tuple"));
        }
        self.flips(m)?
            .iter()
            .map(|sigma| {
                let flipped = blocks
                    .iter()
                    .map(|b| flip_public(b, sigma))
                    .collect::<Result<Vec<_>>>()?;
                let preds = self.inner.predict(&flipped)?;
                blocks
                    .iter()
                    .zip(preds)
                    .map(|(b, x)| {
                        let shift = b.vv.a.mat_vec_mul(sigma)?;
                        let bits = (0..m)
                            .map(|i| back_map(x.get(i)?, self.mode, i, &b.vv.label(i), sigma, &shift))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(BitVector::from_bits(bits))
                    })
                    .collect()
            })
            .collect()
    }

    fn control_bytes() -> u64 {
        4 + 4 + 1 + 1
    }

    fn forced_bytes(&self) -> u64 {
        self.forced
            .as_ref()
            .map(|f| 4 + f.iter().map(|s| 4 + s.to_bytes().len() as u64).sum::<u64>())
            .unwrap_or(0)
    }
}

impl Decoder for SymWrapper {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Vec<u8> {
        let mut w = write_inner(ParamWriter::new(), self.inner.as_ref())
            .u32(self.s as u32)
            .u32(self.kappa as u32)
            .u64(self.seed)
            .u8(match self.mode {
                BackmapMode::Coordinate => 0,
                BackmapMode::Vvlabel => 1,
            });
        match &self.forced {
            None => w = w.u8(0),
            Some(flips) => {
                w = w.u8(1).u32(flips.len() as u32);
                for f in flips {
                    w = w.bytes(&f.to_bytes());
                }
            }
        }
        w.finish()
    }

    fn param_split(&self) -> Vec<(&'static str, LedgerKind, u64)> {
        let total = 8 * self.params().len() as u64;
        let seed = 8 * (8 + self.forced_bytes());
        let control = 8 * Self::control_bytes();
        vec![
            ("inner decoder", LedgerKind::Parameters, total - seed - control),
            ("flip seeds", LedgerKind::Seed, seed),
            ("wrapper control", LedgerKind::Control, control),
        ]
    }

    fn predict(&self, blocks: &[Instance]) -> Result<Vec<BitVector>> {
        let runs = self.backmapped_runs(blocks)?;
        Ok((0..blocks.len())
            .map(|j| {
                let m = blocks[j].m();
                BitVector::from_bits((0..m).map(|i| {
                    let ones = runs.iter().filter(|run| run[j].bit(i)).count();
                    2 * ones > self.s
                }))
            })
            .collect())
    }
}
