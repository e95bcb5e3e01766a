//! Compression-from-success codecs and their description ledgers.
//!
//! Coarse codeword, bit by bit:
//!
//! ```text
//! 0xC5 | version | name_len:8 | name | digest:64 | gamma(|params|+1) | params
//!      | gamma(t+1) | gamma(|S|+1) | gamma(rank_bytes+1) | rank (big-endian)
//!      | x_j for j not in S, in order, m bits each
//! ```
//!
//! Fine codeword: same identity section after `0xF1 | version`, then
//! `gamma(t+1)` and per block `gamma(|E_j|+1)` followed by the rank of `E_j`
//! in exactly `ceil(log2 C(m, |E_j|))` bits. Streams end with at most seven
//! zero padding bits.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::decoders::{run_decoder, Decoder, DecoderId, Registry};
use crate::ensemble::{ceil_log2, Instance};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::stats::binary_entropy;

mod bits;
mod ledger;
mod rank;

pub use bits::{gamma_len, BitReader, BitWriter};
pub use ledger::{DescriptionLedger, LedgerItem, LedgerKind};
pub use rank::{binomial, binomial_bits, binomial_rank, binomial_unrank, log2_binomial};

pub const COARSE_MAGIC: u8 = 0xC5;
pub const FINE_MAGIC: u8 = 0xF1;
pub const CODEC_VERSION: u8 = 1;
/// Fixed header slack allowed on top of `2 ceil(log2 t)` in the bounds.
pub const HEADER_SLACK: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    pub bits: usize,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Codeword {
    /// A codeword read back from its byte form; trailing padding is checked
    /// when decoding.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self {
            bits: bytes.len() * 8,
            bytes,
        }
    }
}

/// `E_j`: mismatched positions of each block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorMask {
    pub sets: Vec<Vec<usize>>,
}

impl ErrorMask {
    pub fn of(predictions: &[BitVector], truths: &[BitVector]) -> Result<Self> {
        let sets = predictions
            .iter()
            .zip(truths)
            .map(|(p, x)| Ok(p.xor(x)?.ones()))
            .collect::<Result<_>>()?;
        Ok(Self { sets })
    }

    pub fn apply(&self, predictions: &[BitVector]) -> Result<Vec<BitVector>> {
        predictions
            .iter()
            .zip(&self.sets)
            .map(|(p, e)| {
                let mut x = p.clone();
                for &i in e {
                    x.flip(i)?;
                }
                Ok(x)
            })
            .collect()
    }
}

fn check_shapes(blocks: &[Instance], truths: &[BitVector]) -> Result<usize> {
    if blocks.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: blocks.len(),
            found: truths.len(),
        });
    }
    let m = blocks.first().map(Instance::m).unwrap_or(0);
    for (b, x) in blocks.iter().zip(truths) {
        if b.m() != m || x.len() != m {
            return Err(Error::invalid("blocks", "every block and truth needs the same m"));
        }
    }
    Ok(m)
}

/// Writes the identity and parameter sections and appends the decoder's
/// own ledger items.
fn write_decoder(w: &mut BitWriter, d: &dyn Decoder, ledger: &mut DescriptionLedger) {
    let start = w.len();
    let id = d.id();
    let params = d.params();
    assert!(id.name.len() < 256, "decoder names are at most 255 bytes");
    w.write_bits(id.name.len() as u64, 8);
    w.write_bytes(id.name.as_bytes());
    w.write_bits(id.digest, 64);
    w.write_gamma(params.len() as u64 + 1);
    w.write_bytes(&params);
    let own = d.description_length();
    assert_eq!(own.total as usize, w.len() - start, "decoder ledger disagrees with its encoding");
    ledger.extend(&own);
}

fn read_decoder(r: &mut BitReader<'_>, registry: &Registry) -> Result<Box<dyn Decoder>> {
    let n = r.read_bits(8)? as usize;
    let name = String::from_utf8(r.read_bytes(n)?)
        .map_err(|_| Error::Malformed("decoder name is not UTF-8".into()))?;
    let digest = r.read_bits(64)?;
    let len = r.read_gamma()? - 1;
    let params = r.read_bytes(len as usize)?;
    registry.resolve(&DecoderId { name, digest }, &params)
}

fn write_header(w: &mut BitWriter, magic: u8, ledger: &mut DescriptionLedger) {
    w.write_bits(magic as u64, 8);
    w.write_bits(CODEC_VERSION as u64, 8);
    ledger.push("magic and version", LedgerKind::Control, 16);
}

fn read_header(r: &mut BitReader<'_>, magic: u8) -> Result<()> {
    let got = r.read_bits(8)? as u8;
    if got != magic {
        return Err(Error::Malformed(format!("magic {got:#04x}, expected {magic:#04x}")));
    }
    let v = r.read_bits(8)? as u8;
    if v != CODEC_VERSION {
        return Err(Error::Malformed(format!("codec version {v}")));
    }
    Ok(())
}

fn read_count(r: &mut BitReader<'_>, what: &str, max: u64) -> Result<usize> {
    let n = r.read_gamma()? - 1;
    if n > max {
        return Err(Error::Malformed(format!("{what} {n} exceeds {max}")));
    }
    Ok(n as usize)
}

fn finish(w: BitWriter, ledger: &DescriptionLedger) -> Codeword {
    let (bytes, bits) = w.finish();
    assert_eq!(bits as u64, ledger.total, "ledger total must equal codeword length");
    Codeword { bits, bytes }
}

/// Only zero padding may follow the last field.
fn check_end(r: &mut BitReader<'_>) -> Result<()> {
    let rest = r.remaining();
    if rest >= 8 {
        return Err(Error::Malformed(format!("{rest} trailing bits")));
    }
    for _ in 0..rest {
        if r.read_bit()? {
            return Err(Error::Malformed("nonzero padding".into()));
        }
    }
    Ok(())
}

pub fn encode_coarse(
    d: &dyn Decoder,
    blocks: &[Instance],
    truths: &[BitVector],
) -> Result<(Codeword, DescriptionLedger)> {
    let m = check_shapes(blocks, truths)?;
    let preds = run_decoder(d, blocks)?;
    let t = blocks.len();
    let hits: Vec<usize> = (0..t).filter(|&j| preds[j] == truths[j]).collect();
    let mut w = BitWriter::new();
    let mut ledger = DescriptionLedger::new();
    write_header(&mut w, COARSE_MAGIC, &mut ledger);
    write_decoder(&mut w, d, &mut ledger);
    let n0 = w.len();
    w.write_gamma(t as u64 + 1);
    w.write_gamma(hits.len() as u64 + 1);
    ledger.push("tuple length and success count", LedgerKind::Control, (w.len() - n0) as u64);
    let rank = binomial_rank(&hits, t)?;
    let rank_bytes = if rank.is_zero() {
        Vec::new()
    } else {
        rank.to_bytes_be()
    };
    let n0 = w.len();
    w.write_gamma(rank_bytes.len() as u64 + 1);
    ledger.push("rank length", LedgerKind::Control, (w.len() - n0) as u64);
    w.write_bytes(&rank_bytes);
    ledger.push("success-set rank", LedgerKind::Payload, 8 * rank_bytes.len() as u64);
    let mut hit = hits.iter().peekable();
    let mut verbatim = 0;
    for (j, x) in truths.iter().enumerate() {
        if hit.peek() == Some(&&j) {
            hit.next();
            continue;
        }
        for bit in x.iter() {
            w.push(bit);
        }
        verbatim += m as u64;
    }
    ledger.push("verbatim misses", LedgerKind::Payload, verbatim);
    Ok((finish(w, &ledger), ledger))
}

pub fn decode_coarse(cw: &Codeword, blocks: &[Instance], registry: &Registry) -> Result<Vec<BitVector>> {
    let mut r = BitReader::new(&cw.bytes, cw.bits)?;
    read_header(&mut r, COARSE_MAGIC)?;
    let d = read_decoder(&mut r, registry)?;
    let t = read_count(&mut r, "tuple length", blocks.len() as u64)?;
    if t != blocks.len() {
        return Err(Error::Malformed(format!("codeword has t = {t}, {} blocks given", blocks.len())));
    }
    let s = read_count(&mut r, "success count", t as u64)?;
    let n_bytes = read_count(&mut r, "rank length", 1 << 20)?;
    let rank_bytes = r.read_bytes(n_bytes)?;
    if rank_bytes.first() == Some(&0) {
        return Err(Error::Malformed("rank has a leading zero byte".into()));
    }
    let hits = binomial_unrank(t, s, &BigUint::from_bytes_be(&rank_bytes))?;
    let preds = run_decoder(d.as_ref(), blocks)?;
    let mut hit = hits.iter().peekable();
    let mut out = Vec::with_capacity(t);
    for (j, b) in blocks.iter().enumerate() {
        if hit.peek() == Some(&&j) {
            hit.next();
            out.push(preds[j].clone());
        } else {
            let bits = (0..b.m()).map(|_| r.read_bit()).collect::<Result<Vec<_>>>()?;
            out.push(BitVector::from_bits(bits));
        }
    }
    check_end(&mut r)?;
    Ok(out)
}

pub fn encode_fine(
    d: &dyn Decoder,
    blocks: &[Instance],
    truths: &[BitVector],
) -> Result<(Codeword, DescriptionLedger)> {
    let m = check_shapes(blocks, truths)?;
    let preds = run_decoder(d, blocks)?;
    let mask = ErrorMask::of(&preds, truths)?;
    let mut w = BitWriter::new();
    let mut ledger = DescriptionLedger::new();
    write_header(&mut w, FINE_MAGIC, &mut ledger);
    write_decoder(&mut w, d, &mut ledger);
    let n0 = w.len();
    w.write_gamma(blocks.len() as u64 + 1);
    ledger.push("tuple length", LedgerKind::Control, (w.len() - n0) as u64);
    let (mut count_bits, mut rank_bits) = (0u64, 0u64);
    for e in &mask.sets {
        let n0 = w.len();
        w.write_gamma(e.len() as u64 + 1);
        count_bits += (w.len() - n0) as u64;
        let width = binomial_bits(m, e.len());
        let rank = binomial_rank(e, m)?;
        for k in (0..width as u64).rev() {
            w.push(rank.bit(k));
        }
        rank_bits += width as u64;
    }
    ledger.push("error counts", LedgerKind::Payload, count_bits);
    ledger.push("error-set ranks", LedgerKind::Payload, rank_bits);
    Ok((finish(w, &ledger), ledger))
}

pub fn decode_fine(cw: &Codeword, blocks: &[Instance], registry: &Registry) -> Result<Vec<BitVector>> {
    let mut r = BitReader::new(&cw.bytes, cw.bits)?;
    read_header(&mut r, FINE_MAGIC)?;
    let d = read_decoder(&mut r, registry)?;
    let t = read_count(&mut r, "tuple length", blocks.len() as u64)?;
    if t != blocks.len() {
        return Err(Error::Malformed(format!("codeword has t = {t}, {} blocks given", blocks.len())));
    }
    let mut sets = Vec::with_capacity(t);
    for b in blocks {
        let m = b.m();
        let e = read_count(&mut r, "error count", m as u64)?;
        let width = binomial_bits(m, e);
        let mut rank = BigUint::zero();
        for _ in 0..width {
            rank <<= 1;
            if r.read_bit()? {
                rank += 1u32;
            }
        }
        sets.push(binomial_unrank(m, e, &rank)?);
    }
    check_end(&mut r)?;
    let preds = run_decoder(d.as_ref(), blocks)?;
    ErrorMask { sets }.apply(&preds)
}

/// Right-hand side of the coarse bound:
/// `L + ceil(log2 C(t, s)) + (t - s) m + 64 + 2 ceil(log2 t)`.
pub fn coarse_bound(l: u64, t: usize, s: usize, m: usize) -> u64 {
    l + binomial_bits(t, s) as u64 + ((t - s) * m) as u64 + HEADER_SLACK + 2 * ceil_log2(t) as u64
}

/// `L + sum ceil(log2 C(m, |E_j|)) + sum gamma_len(|E_j| + 1) + 64 + 2 ceil(log2 t)`.
pub fn fine_bound(l: u64, m: usize, errors: &[usize]) -> u64 {
    let t = errors.len();
    l + errors
        .iter()
        .map(|&e| (binomial_bits(m, e) + gamma_len(e as u64 + 1)) as u64)
        .sum::<u64>()
        + HEADER_SLACK
        + 2 * ceil_log2(t) as u64
}

/// Entropy form: `sum m H2(|E_j| / m)` in place of the exact binomial ranks.
pub fn fine_entropy_bound(l: u64, m: usize, errors: &[usize]) -> f64 {
    let t = errors.len();
    l as f64
        + errors
            .iter()
            .map(|&e| m as f64 * binary_entropy(e as f64 / m as f64) + gamma_len(e as u64 + 1) as f64)
            .sum::<f64>()
        + HEADER_SLACK as f64
        + 2.0 * ceil_log2(t) as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct CodecAudit {
    pub codec: String,
    pub decoder: String,
    pub t: usize,
    pub m: usize,
    pub decoder_bits: u64,
    pub successes: usize,
    pub error_bits: usize,
    pub ledger: DescriptionLedger,
    pub codeword_bits: usize,
    pub lemma_bound: u64,
    pub entropy_bound: Option<f64>,
    pub within_bound: bool,
    pub round_trip: bool,
}

/// Encodes, decodes and checks the ledger against the matching bound.
pub fn audit(
    codec: &str,
    d: &dyn Decoder,
    blocks: &[Instance],
    truths: &[BitVector],
    registry: &Registry,
) -> Result<CodecAudit> {
    let m = check_shapes(blocks, truths)?;
    let preds = run_decoder(d, blocks)?;
    let mask = ErrorMask::of(&preds, truths)?;
    let errors: Vec<usize> = mask.sets.iter().map(Vec::len).collect();
    let successes = errors.iter().filter(|&&e| e == 0).count();
    let l = d.description_length().total;
    let t = blocks.len();
    let (cw, ledger, decoded, bound, entropy) = match codec {
        "coarse" => {
            let (cw, ledger) = encode_coarse(d, blocks, truths)?;
            let dec = decode_coarse(&cw, blocks, registry)?;
            (cw, ledger, dec, coarse_bound(l, t, successes, m), None)
        }
        "fine" => {
            let (cw, ledger) = encode_fine(d, blocks, truths)?;
            let dec = decode_fine(&cw, blocks, registry)?;
            let entropy = fine_entropy_bound(l, m, &errors);
            (cw, ledger, dec, fine_bound(l, m, &errors), Some(entropy))
        }
        other => return Err(Error::invalid("codec", format!("unknown codec {other:?}"))),
    };
    Ok(CodecAudit {
        codec: codec.to_string(),
        decoder: d.id().to_string(),
        t,
        m,
        decoder_bits: l,
        successes,
        error_bits: errors.iter().sum(),
        within_bound: ledger.total <= bound,
        codeword_bits: cw.bits,
        ledger,
        lemma_bound: bound,
        entropy_bound: entropy,
        round_trip: decoded == truths,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UnionBoundRow {
    pub t: usize,
    /// `(δ - γ log2(1 / (1/2 + ε̂))) t`.
    pub exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnionBoundCurve {
    pub delta: f64,
    pub gamma: f64,
    pub eps_hat: f64,
    pub eta: f64,
    /// `Λ = log2(1 / (1/2 + ε̂))`.
    pub lambda: f64,
    pub per_block_exponent: f64,
    /// `δ <= γΛ - η`.
    pub inequality_holds: bool,
    pub rows: Vec<UnionBoundRow>,
}

/// The union bound `2^{δt} (1/2 + ε̂)^{γt}` in log form.
pub fn union_bound_curve(delta: f64, gamma: f64, eps_hat: f64, eta: f64, ts: &[usize]) -> Result<UnionBoundCurve> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("delta", format!("{delta} not in [0, 1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} not in (0, 1]")));
    }
    if !(0.0..0.5).contains(&eps_hat) {
        return Err(Error::invalid("eps_hat", format!("{eps_hat} not in [0, 1/2)")));
    }
    let lambda = -(0.5 + eps_hat).log2();
    let per_block_exponent = delta - gamma * lambda;
    Ok(UnionBoundCurve {
        delta,
        gamma,
        eps_hat,
        eta,
        lambda,
        per_block_exponent,
        inequality_holds: delta <= gamma * lambda - eta,
        rows: ts
            .iter()
            .map(|&t| UnionBoundRow {
                t,
                exponent: per_block_exponent * t as f64,
            })
            .collect(),
    })
}
