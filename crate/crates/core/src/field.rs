//! Arithmetic in GF(2^w) for 1 <= w <= 64.
//!
//! Each width uses a fixed reduction polynomial `x^w + low(x)`: the
//! irreducible polynomial of degree `w` whose lower-order part, read as an
//! integer, is smallest. `IRREDUCIBLE_LOW[w]` stores that lower part
//! (bit j = coefficient of x^j). The table is reproduced in the README and
//! every entry is re-verified by a Rabin irreducibility test in the unit tests.

use crate::error::{Error, Result};

#[rustfmt::skip]
pub const IRREDUCIBLE_LOW: [u64; 65] = [
    0,
    0x1,  0x3,  0x3,  0x3,  0x5,  0x3,  0x3,  0x1b, 0x3,  0x9,  // w = 1..10
    0x5,  0x9,  0x1b, 0x21, 0x3,  0x2b, 0x9,  0x9,  0x27, 0x9,  // 11..20
    0x5,  0x3,  0x21, 0x1b, 0x9,  0x1b, 0x27, 0x3,  0x5,  0x3,  // 21..30
    0x9,  0x8d, 0x4b, 0x1b, 0x5,  0x35, 0x3f, 0x63, 0x11, 0x39, // 31..40
    0x9,  0x27, 0x59, 0x21, 0x1b, 0x3,  0x21, 0x2d, 0x71, 0x1d, // 41..50
    0x4b, 0x9,  0x47, 0x7d, 0x47, 0x95, 0x11, 0x63, 0x7b, 0x3,  // 51..60
    0x27, 0x69, 0x3,  0x1b,                                     // 61..64
];

/// The field GF(2^w); elements are the low `w` bits of a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2w {
    width: u32,
    low: u64,
}

impl Gf2w {
    pub fn new(width: u32) -> Result<Self> {
        if !(1..=64).contains(&width) {
            return Err(Error::invalid("field_width", format!("{width} not in 1..=64")));
        }
        Ok(Self {
            width,
            low: IRREDUCIBLE_LOW[width as usize],
        })
    }

    /// Smallest width with `2^w >= n` (at least 1).
    pub fn width_for(n: usize) -> u32 {
        let mut w = 1;
        while w < 64 && (1u128 << w) < n as u128 {
            w += 1;
        }
        w
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let w = self.width;
        let prod = clmul(a & self.mask(), b & self.mask());
        // Reduce bits 2w-2 down to w using x^w = low(x).
        let mut p = prod;
        for bit in (w..2 * w).rev() {
            if (p >> bit) & 1 == 1 {
                p ^= 1u128 << bit;
                p ^= (self.low as u128) << (bit - w);
            }
        }
        p as u64
    }

    /// Horner evaluation of `coeffs[0] + coeffs[1] x + ...` at `x`.
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| self.mul(acc, x) ^ (c & self.mask()))
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }
}

fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= (a as u128) << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    // Polynomials over GF(2) as u128 bit sets, for the irreducibility oracle.
    fn poly_mod(mut a: u128, p: u128) -> u128 {
        let dp = 127 - p.leading_zeros();
        while a != 0 && 127 - a.leading_zeros() >= dp {
            let shift = (127 - a.leading_zeros()) - dp;
            a ^= p << shift;
        }
        a
    }

    fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            let r = poly_mod(a, b);
            a = b;
            b = r;
        }
        a
    }

    fn prime_factors(mut n: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                out.push(d);
                while n % d == 0 {
                    n /= d;
                }
            }
            d += 1;
        }
        if n > 1 {
            out.push(n);
        }
        out
    }

    /// Rabin: p of degree w is irreducible iff x^(2^w) = x mod p and
    /// gcd(x^(2^(w/q)) - x, p) = 1 for every prime q | w.
    fn rabin_irreducible(w: u32, low: u64) -> bool {
        let f = Gf2w { width: w, low };
        let p = (1u128 << w) | low as u128;
        let x_pow = |k: u32| (0..k).fold(2u64, |acc, _| f.mul(acc, acc));
        if w == 1 {
            return true;
        }
        if x_pow(w) != 2 {
            return false;
        }
        prime_factors(w)
            .into_iter()
            .all(|q| poly_gcd(p, (x_pow(w / q) ^ 2) as u128) == 1)
    }

    #[test]
    fn table_entries_are_irreducible() {
        for w in 2..=64u32 {
            assert!(rabin_irreducible(w, IRREDUCIBLE_LOW[w as usize]), "w={w}");
        }
    }

    #[test]
    fn aes_field_known_product() {
        let f = Gf2w::new(8).unwrap();
        // Standard GF(2^8) example: 0x57 * 0x83 = 0xc1.
        assert_eq!(f.mul(0x57, 0x83), 0xc1);
    }

    #[test]
    fn multiplicative_group_order() {
        for w in [2u32, 3, 5, 8, 13] {
            let f = Gf2w::new(w).unwrap();
            let order = (1u64 << w) - 1;
            for a in 1..(1u64 << w).min(50) {
                assert_eq!(f.pow(a, order), 1, "w={w} a={a}");
            }
        }
    }

    #[test]
    fn wide_field_distributes() {
        let f = Gf2w::new(64).unwrap();
        let (a, b, c) = (0x1234_5678_9abc_def0, 0x0fed_cba9_8765_4321, 0xdead_beef_cafe_f00d);
        assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
        assert_eq!(f.mul(a, b), f.mul(b, a));
    }

    #[test]
    fn width_for_sizes() {
        assert_eq!(Gf2w::width_for(1), 1);
        assert_eq!(Gf2w::width_for(2), 1);
        assert_eq!(Gf2w::width_for(3), 2);
        assert_eq!(Gf2w::width_for(16), 4);
        assert_eq!(Gf2w::width_for(17), 5);
        assert!(Gf2w::new(0).is_err());
        assert!(Gf2w::new(65).is_err());
    }
}
