//! Bit vectors and matrices over GF(2).
//!
//! Index 0 is the lowest-order bit everywhere, including the packed
//! serialization (little-endian bit order within bytes).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length vector over GF(2), packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; word_count(len)],
        }
    }

    /// Unit vector `e_i`.
    pub fn unit(len: usize, i: usize) -> Result<Self> {
        let mut v = Self::zeros(len);
        v.set(i, true)?;
        Ok(v)
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Self { len, words }
    }

    /// Builds a vector of length `len` from the low bits of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    /// Low 64 bits as an integer; panics if the vector is longer than 64.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 on a vector longer than 64 bits");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Result<bool> {
        if i >= self.len {
            return Err(Error::IndexOutOfRange { index: i, len: self.len });
        }
        Ok(self.words[i / 64] >> (i % 64) & 1 == 1)
    }

    /// Unchecked-by-`Result` accessor for hot loops; still panics out of range.
    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) -> Result<()> {
        if i >= self.len {
            return Err(Error::IndexOutOfRange { index: i, len: self.len });
        }
        let w = &mut self.words[i / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
        Ok(())
    }

    pub fn flip(&mut self, i: usize) -> Result<()> {
        if i >= self.len {
            return Err(Error::IndexOutOfRange { index: i, len: self.len });
        }
        self.words[i / 64] ^= 1 << (i % 64);
        Ok(())
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }

    /// Positions of the set bits, ascending.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.bit(i)).collect()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    /// Inner product over GF(2): parity of the bitwise AND.
    pub fn inner_product(&self, other: &Self) -> Result<bool> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones % 2 == 1)
    }

    /// Wire form: 32-bit little-endian length, then `ceil(len/8)` packed bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u32).to_le_bytes());
        out.extend(self.packed_bytes());
        out
    }

    pub fn packed_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        (0..nbytes)
            .map(|k| (self.words[k / 8] >> (8 * (k % 8))) as u8)
            .collect()
    }

    /// Parses the wire form, returning the vector and the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 4 {
            return Err(Error::Malformed("bit vector length prefix truncated".into()));
        }
        let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let nbytes = len.div_ceil(8);
        let body = bytes
            .get(4..4 + nbytes)
            .ok_or_else(|| Error::Malformed("bit vector body truncated".into()))?;
        let mut v = Self::zeros(len);
        for (k, &byte) in body.iter().enumerate() {
            v.words[k / 8] |= (byte as u64) << (8 * (k % 8));
        }
        // Padding bits past `len` must be zero so equality stays positional.
        if len % 8 != 0 && body[nbytes - 1] >> (len % 8) != 0 {
            return Err(Error::Malformed("nonzero padding bits in bit vector".into()));
        }
        Ok((v, 4 + nbytes))
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

/// A `k x m` matrix over GF(2), stored as rows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: Vec<BitVector>,
    cols: usize,
}

impl BitMatrix {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            rows: vec![BitVector::zeros(m); k],
            cols: m,
        }
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| BitVector::unit(n, i).unwrap()).collect();
        Self { rows, cols: n }
    }

    /// Builds a matrix from rows; all rows must share the length `m`.
    pub fn from_rows(rows: Vec<BitVector>, m: usize) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad.len(),
            });
        }
        Ok(Self { rows, cols: m })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &BitVector {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].bit(c)
    }

    pub fn mat_vec_mul(&self, x: &BitVector) -> Result<BitVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let bits = self.rows.iter().map(|r| r.inner_product(x).unwrap());
        Ok(BitVector::from_bits(bits))
    }

    /// The `i`-th column `A e_i`.
    pub fn column(&self, i: usize) -> Result<BitVector> {
        if i >= self.cols {
            return Err(Error::IndexOutOfRange { index: i, len: self.cols });
        }
        Ok(BitVector::from_bits(self.rows.iter().map(|r| r.bit(i))))
    }

    pub fn push_row(&mut self, row: BitVector) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Solves `A x = b`, returning the full affine solution set.
    pub fn solve_affine(&self, b: &BitVector) -> Result<AffineCoset> {
        gaussian_affine_solve(self, b)
    }
}

/// Solution set `{particular ^ span(basis)}` of a linear system over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineCoset {
    pub rank: usize,
    /// `None` when the system is inconsistent.
    pub particular: Option<BitVector>,
    pub null_basis: Vec<BitVector>,
}

impl AffineCoset {
    pub fn is_consistent(&self) -> bool {
        self.particular.is_some()
    }

    pub fn dimension(&self) -> usize {
        self.null_basis.len()
    }

    /// Enumerates every member in Gray-code order. Intended for small dimensions.
    pub fn members(&self) -> Vec<BitVector> {
        let Some(p) = &self.particular else {
            return Vec::new();
        };
        let d = self.null_basis.len();
        let mut out = Vec::with_capacity(1 << d);
        let mut x = p.clone();
        out.push(x.clone());
        for step in 1u64..(1u64 << d) {
            let j = step.trailing_zeros() as usize;
            x.xor_assign(&self.null_basis[j]).unwrap();
            out.push(x.clone());
        }
        out
    }
}

/// Gauss-Jordan elimination for `A x = b` over GF(2).
pub fn gaussian_affine_solve(a: &BitMatrix, b: &BitVector) -> Result<AffineCoset> {
    let k = a.row_count();
    let m = a.col_count();
    if b.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: b.len(),
        });
    }
    let mut rows: Vec<(BitVector, bool)> = a
        .rows()
        .iter()
        .cloned()
        .zip(b.iter())
        .collect();

    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..m {
        let Some(p) = (r..k).find(|&i| rows[i].0.bit(c)) else {
            continue;
        };
        rows.swap(r, p);
        let (pivot_row, pivot_rhs) = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.0.bit(c) {
                row.0.xor_assign(&pivot_row).unwrap();
                row.1 ^= pivot_rhs;
            }
        }
        pivots.push(c);
        r += 1;
        if r == k {
            break;
        }
    }
    let rank = pivots.len();

    // Zero rows with a set right-hand side mean the system is inconsistent.
    let consistent = rows[rank..].iter().all(|(_, rhs)| !rhs);

    let mut is_pivot = vec![false; m];
    for &c in &pivots {
        is_pivot[c] = true;
    }

    let particular = consistent.then(|| {
        let mut x = BitVector::zeros(m);
        for (row_idx, &c) in pivots.iter().enumerate() {
            if rows[row_idx].1 {
                x.set(c, true).unwrap();
            }
        }
        x
    });

    let null_basis = (0..m)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = BitVector::zeros(m);
            v.set(f, true).unwrap();
            for (row_idx, &c) in pivots.iter().enumerate() {
                if rows[row_idx].0.bit(f) {
                    v.set(c, true).unwrap();
                }
            }
            v
        })
        .collect();

    Ok(AffineCoset {
        rank,
        particular,
        null_basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bits(bits.iter().map(|&b| b == 1))
    }

    fn naive_mul(a: &BitMatrix, x: &BitVector) -> BitVector {
        let mut out = Vec::new();
        for r in 0..a.row_count() {
            let mut acc = 0u8;
            for c in 0..a.col_count() {
                acc ^= (a.get(r, c) as u8) & (x.bit(c) as u8);
            }
            out.push(acc == 1);
        }
        BitVector::from_bits(out)
    }

    fn matrix_from_u64(rows: &[u64], m: usize) -> BitMatrix {
        BitMatrix::from_rows(rows.iter().map(|&r| BitVector::from_u64(r, m)).collect(), m).unwrap()
    }

    #[test]
    fn identity_times_vector() {
        let a = BitMatrix::identity(3);
        assert_eq!(a.mat_vec_mul(&bv(&[1, 0, 1])).unwrap(), bv(&[1, 0, 1]));
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let a = BitMatrix::zeros(2, 3);
        assert_eq!(a.mat_vec_mul(&bv(&[1, 1, 1])).unwrap(), bv(&[0, 0]));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = BitMatrix::zeros(2, 3);
        assert!(matches!(
            a.mat_vec_mul(&bv(&[1, 1])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(bv(&[1]).inner_product(&bv(&[1, 0])).is_err());
        assert!(a.column(3).is_err());
    }

    #[test]
    fn column_read_off() {
        let a = BitMatrix::from_rows(vec![bv(&[1, 0, 1]), bv(&[0, 1, 1])], 3).unwrap();
        assert_eq!(a.column(2).unwrap(), bv(&[1, 1]));
        let id = BitMatrix::identity(4);
        for j in 0..4 {
            assert_eq!(id.column(j).unwrap(), BitVector::unit(4, j).unwrap());
        }
    }

    #[test]
    fn inner_product_examples() {
        assert!(!bv(&[1, 0, 1]).inner_product(&bv(&[1, 1, 1])).unwrap());
        let u = bv(&[1, 1, 0, 1, 1, 1]);
        assert_eq!(u.inner_product(&u).unwrap(), u.weight() % 2 == 1);
    }

    #[test]
    fn solve_identity_and_zero() {
        let b = bv(&[1, 0, 1, 1]);
        let sol = gaussian_affine_solve(&BitMatrix::identity(4), &b).unwrap();
        assert_eq!(sol.particular, Some(b));
        assert!(sol.null_basis.is_empty());
        assert_eq!(sol.rank, 4);

        let sol = gaussian_affine_solve(&BitMatrix::zeros(2, 3), &bv(&[0, 0])).unwrap();
        assert_eq!(sol.particular, Some(BitVector::zeros(3)));
        assert_eq!(sol.rank, 0);
        let mut basis = sol.null_basis.clone();
        basis.sort();
        let mut units: Vec<_> = (0..3).map(|i| BitVector::unit(3, i).unwrap()).collect();
        units.sort();
        assert_eq!(basis, units);

        let sol = gaussian_affine_solve(&BitMatrix::zeros(1, 3), &bv(&[1])).unwrap();
        assert!(!sol.is_consistent());
        assert!(sol.members().is_empty());
    }

    #[test]
    fn random_6x10_coset_matches_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows: Vec<u64> = (0..6).map(|_| rng.gen::<u64>() & 0x3ff).collect();
            let a = matrix_from_u64(&rows, 10);
            let b = BitVector::from_u64(rng.gen::<u64>() & 0x3f, 6);
            let sol = gaussian_affine_solve(&a, &b).unwrap();
            let mut brute: Vec<BitVector> = (0u64..1024)
                .map(|x| BitVector::from_u64(x, 10))
                .filter(|x| naive_mul(&a, x) == b)
                .collect();
            let mut members = sol.members();
            for x in &members {
                assert_eq!(a.mat_vec_mul(x).unwrap(), b);
            }
            if sol.is_consistent() {
                assert_eq!(members.len(), 1 << (10 - sol.rank));
            }
            brute.sort();
            members.sort();
            assert_eq!(members, brute);
        }
    }

    #[test]
    fn exhaustive_coset_membership_small_systems() {
        // Every system with k=3 rows over m=4 columns and a fixed b sweep.
        for packed in 0u64..(1 << 12) {
            let rows = [packed & 0xf, (packed >> 4) & 0xf, (packed >> 8) & 0xf];
            let a = matrix_from_u64(&rows, 4);
            for bval in [0u64, 5] {
                let b = BitVector::from_u64(bval, 3);
                let sol = gaussian_affine_solve(&a, &b).unwrap();
                let mut members = sol.members();
                members.sort();
                let brute: Vec<_> = (0u64..16)
                    .map(|x| BitVector::from_u64(x, 4))
                    .filter(|x| naive_mul(&a, x) == b)
                    .collect();
                assert_eq!(members, brute, "rows {rows:?} b {bval}");
            }
        }
    }

    #[test]
    fn serialization_layout() {
        let v = bv(&[1, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
        let bytes = v.to_bytes();
        assert_eq!(bytes, vec![10, 0, 0, 0, 0b0000_0001, 0b0000_0011]);
        let (back, used) = BitVector::from_bytes(&bytes).unwrap();
        assert_eq!(back, v);
        assert_eq!(used, 6);
        assert!(BitVector::from_bytes(&[10, 0, 0, 0, 1, 0b1000_0011]).is_err());
        assert!(BitVector::from_bytes(&[10, 0, 0]).is_err());
    }

    #[test]
    fn get_is_bounds_checked() {
        let v = BitVector::zeros(5);
        assert!(v.get(5).is_err());
        assert!(BitVector::unit(5, 5).is_err());
    }

    proptest! {
        #[test]
        fn linearity_and_naive_agreement(rows in proptest::collection::vec(0u64..256, 4), x in 0u64..256, y in 0u64..256) {
            let a = matrix_from_u64(&rows, 8);
            let x = BitVector::from_u64(x, 8);
            let y = BitVector::from_u64(y, 8);
            let lhs = a.mat_vec_mul(&x.xor(&y).unwrap()).unwrap();
            let rhs = a.mat_vec_mul(&x).unwrap().xor(&a.mat_vec_mul(&y).unwrap()).unwrap();
            prop_assert_eq!(&lhs, &rhs);
            prop_assert_eq!(a.mat_vec_mul(&x).unwrap(), naive_mul(&a, &x));
            for i in 0..8 {
                prop_assert_eq!(a.column(i).unwrap(), a.mat_vec_mul(&BitVector::unit(8, i).unwrap()).unwrap());
            }
        }

        #[test]
        fn inner_product_symmetric_bilinear(u in 0u64..(1 << 20), v in 0u64..(1 << 20), w in 0u64..(1 << 20)) {
            let (u, v, w) = (BitVector::from_u64(u, 20), BitVector::from_u64(v, 20), BitVector::from_u64(w, 20));
            prop_assert_eq!(u.inner_product(&v).unwrap(), v.inner_product(&u).unwrap());
            let lhs = u.xor(&v).unwrap().inner_product(&w).unwrap();
            prop_assert_eq!(lhs, u.inner_product(&w).unwrap() ^ v.inner_product(&w).unwrap());
            let naive = (0..20).fold(false, |acc, i| acc ^ (u.bit(i) & v.bit(i)));
            prop_assert_eq!(u.inner_product(&v).unwrap(), naive);
            prop_assert!(u.xor(&u).unwrap().is_zero());
        }

        #[test]
        fn byte_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let v = BitVector::from_bits(bits);
            let (back, _) = BitVector::from_bytes(&v.to_bytes()).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
