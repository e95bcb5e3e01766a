//! Small statistical helpers shared by the experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail p-value of Pearson's χ² test of `counts` against the uniform distribution.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let cells = counts.len();
    if cells < 2 || total == 0 {
        return 1.0;
    }
    let expect = total as f64 / cells as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    chi_square_sf(stat, (cells - 1) as f64)
}

/// Upper-tail p-value of the χ² independence test on a 2x2 table
/// `[[n00, n01], [n10, n11]]`. Returns 1 when a margin is empty.
pub fn chi_square_2x2_p(table: [[u64; 2]; 2]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if n == 0 || rows.contains(&0) || cols.contains(&0) {
        return 1.0;
    }
    let mut stat = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let e = rows[r] as f64 * cols[c] as f64 / n as f64;
            stat += (obs as f64 - e).powi(2) / e;
        }
    }
    chi_square_sf(stat, 1.0)
}

pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Standard error of a Bernoulli rate estimate.
pub fn bernoulli_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// The neutrality band `4/sqrt(n)`.
pub fn band(n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        4.0 / (n as f64).sqrt()
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Pearson correlation of two 0/1 sequences; 0 when either is constant.
pub fn bit_correlation(xs: &[bool], ys: &[bool]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().filter(|&&b| b).count() as f64 / n;
    let my = ys.iter().filter(|&&b| b).count() as f64 / n;
    let both = xs.iter().zip(ys).filter(|(a, b)| **a && **b).count() as f64 / n;
    let denom = (mx * (1.0 - mx) * my * (1.0 - my)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (both - mx * my) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_pass() {
        assert!(chi_square_uniform_p(&[100, 100, 100, 100]) > 0.99);
        assert!(chi_square_uniform_p(&[400, 0, 0, 0]) < 1e-10);
    }

    #[test]
    fn known_chi_square_tail() {
        // P(chi2_1 > 3.841) = 0.05
        assert!((chi_square_sf(3.841459, 1.0) - 0.05).abs() < 1e-5);
    }

    #[test]
    fn independence_table() {
        assert!(chi_square_2x2_p([[250, 250], [250, 250]]) > 0.99);
        assert!(chi_square_2x2_p([[500, 0], [0, 500]]) < 1e-10);
        assert_eq!(chi_square_2x2_p([[0, 0], [3, 4]]), 1.0);
    }

    #[test]
    fn entropy_and_slope() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-12);
        assert!((bit_correlation(&[true, false, true], &[true, false, true]) - 1.0).abs() < 1e-12);
    }
}
