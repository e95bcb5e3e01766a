//! Combinatorial number system: colex rank of a `w`-subset of `[0, n)`,
//! `rank(S) = sum_k C(s_k, k + 1)` over the sorted elements.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `ceil(log2 C(n, k))`, zero when there is a single subset.
pub fn binomial_bits(n: usize, k: usize) -> usize {
    let c = binomial(n, k);
    if c.is_zero() || c.is_one() {
        0
    } else {
        (c - 1u32).bits() as usize
    }
}

/// `log2 C(n, k)` in floating point, for the entropy checks.
pub fn log2_binomial(n: usize, k: usize) -> f64 {
    use statrs::function::factorial::ln_binomial;
    ln_binomial(n as u64, k as u64) / std::f64::consts::LN_2
}

pub fn binomial_rank(subset: &[usize], n: usize) -> Result<BigUint> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() {
        return Err(Error::invalid("subset", "repeated element"));
    }
    if let Some(&last) = sorted.last() {
        if last >= n {
            return Err(Error::IndexOutOfRange { index: last, len: n });
        }
    }
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &s)| binomial(s, k + 1))
        .sum())
}

pub fn binomial_unrank(n: usize, w: usize, rank: &BigUint) -> Result<Vec<usize>> {
    if *rank >= binomial(n, w) {
        return Err(Error::RankOutOfRange {
            rank: rank.to_string(),
            n,
            w,
        });
    }
    let mut rest = rank.clone();
    let mut out = vec![0; w];
    let mut hi = n;
    for k in (1..=w).rev() {
        // Largest s < hi with C(s, k) <= rest.
        let mut s = hi - 1;
        loop {
            let c = binomial(s, k);
            if c <= rest {
                rest -= c;
                break;
            }
            s -= 1;
        }
        out[k - 1] = s;
        hi = s;
    }
    Ok(out)
}
