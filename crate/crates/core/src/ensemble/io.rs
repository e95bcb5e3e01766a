//! Instance record format.
//!
//! ```text
//! magic "MSKI" | version u8 = 1 | m u32 | M u32 | k u32
//! M x 3 x (var u32, negated u8)
//! k x row (BitVector wire form) | b (BitVector wire form)
//! has_witness u8 | [witness (BitVector wire form)]
//! ```
//! All integers little-endian.

use std::fmt::Write as _;

use super::{Instance, Literal, SignedCnf, VvLayer, Witness};
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

pub const INSTANCE_MAGIC: &[u8; 4] = b"MSKI";
const VERSION: u8 = 1;

pub fn instance_to_bytes(inst: &Instance) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(INSTANCE_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(inst.m() as u32).to_le_bytes());
    out.extend_from_slice(&(inst.cnf.clause_count() as u32).to_le_bytes());
    out.extend_from_slice(&(inst.k() as u32).to_le_bytes());
    for c in &inst.cnf.clauses {
        for l in c {
            out.extend_from_slice(&l.var.to_le_bytes());
            out.push(l.negated as u8);
        }
    }
    for row in inst.vv.a.rows() {
        out.extend(row.to_bytes());
    }
    out.extend(inst.vv.b.to_bytes());
    match inst.witness() {
        Some(w) => {
            out.push(1);
            out.extend(w.x.to_bytes());
        }
        None => out.push(0),
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Malformed(format!("instance truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn bits(&mut self) -> Result<BitVector> {
        let (v, used) = BitVector::from_bytes(&self.bytes[self.pos..])?;
        self.pos += used;
        Ok(v)
    }
}

/// Parses an instance record. A stored witness is rechecked for satisfaction.
pub fn instance_from_bytes(bytes: &[u8]) -> Result<Instance> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != INSTANCE_MAGIC {
        return Err(Error::Malformed("bad instance magic".into()));
    }
    let version = cur.u8()?;
    if version != VERSION {
        return Err(Error::Malformed(format!("unsupported instance version {version}")));
    }
    let m = cur.u32()? as usize;
    let n_clauses = cur.u32()? as usize;
    let k = cur.u32()? as usize;
    let mut clauses = Vec::with_capacity(n_clauses);
    for _ in 0..n_clauses {
        let mut c = [Literal::new(0, false); 3];
        for l in c.iter_mut() {
            let var = cur.u32()?;
            if var as usize >= m {
                return Err(Error::Malformed(format!("variable {var} >= m={m}")));
            }
            let neg = match cur.u8()? {
                0 => false,
                1 => true,
                other => return Err(Error::Malformed(format!("bad sign byte {other}"))),
            };
            *l = Literal::new(var, neg);
        }
        clauses.push(c);
    }
    let rows = (0..k).map(|_| cur.bits()).collect::<Result<Vec<_>>>()?;
    let a = BitMatrix::from_rows(rows, m)?;
    let b = cur.bits()?;
    let vv = VvLayer::new(a, b)?;
    let cnf = SignedCnf { m, clauses };
    let witness = match cur.u8()? {
        0 => None,
        1 => Some(Witness { x: cur.bits()? }),
        other => return Err(Error::Malformed(format!("bad witness flag {other}"))),
    };
    if cur.pos != bytes.len() {
        return Err(Error::Malformed("trailing bytes after instance".into()));
    }
    if let Some(w) = &witness {
        if !w.satisfies(&cnf, &vv) {
            return Err(Error::Malformed("stored witness does not satisfy the instance".into()));
        }
    }
    Ok(Instance::from_parts(cnf, vv, witness))
}

/// DIMACS-style text: `p cnf m M`, 1-based clauses, then one `x` line per
/// XOR row. An `x` line asserts the XOR of its variables is true; a row with
/// `b = 0` is written with its first variable negated.
pub fn instance_to_dimacs(inst: &Instance) -> String {
    let mut s = String::new();
    writeln!(s, "c masked 3-CNF with XOR layer, k={}", inst.k()).unwrap();
    if let Some(w) = inst.witness() {
        writeln!(s, "c witness {}", w.x).unwrap();
    }
    writeln!(s, "p cnf {} {}", inst.m(), inst.cnf.clause_count() + inst.k()).unwrap();
    for c in &inst.cnf.clauses {
        for l in c {
            let v = l.var as i64 + 1;
            write!(s, "{} ", if l.negated { -v } else { v }).unwrap();
        }
        writeln!(s, "0").unwrap();
    }
    for (r, row) in inst.vv.a.rows().iter().enumerate() {
        let vars = row.ones();
        if vars.is_empty() {
            // 0 = b_r: empty XOR, written as a comment to stay parseable.
            writeln!(s, "c empty xor row with rhs {}", inst.vv.b.bit(r) as u8).unwrap();
            continue;
        }
        write!(s, "x").unwrap();
        for (pos, v) in vars.iter().enumerate() {
            let lit = *v as i64 + 1;
            let lit = if pos == 0 && !inst.vv.b.bit(r) { -lit } else { lit };
            write!(s, " {lit}").unwrap();
        }
        writeln!(s, " 0").unwrap();
    }
    s
}
