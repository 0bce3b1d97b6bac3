//! Exact integer combinatorics and binomial probabilities.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

/// `C(n, k)` as an exact integer; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// Correctly scaled `num / den` as `f64` for arbitrarily large operands.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries ~66 significant bits.
    let shift = 66 - (num.bits() as i64 - den.bits() as i64);
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    scale_pow2(q.to_f64().unwrap_or(f64::INFINITY), -shift)
}

pub fn signed_ratio_to_f64(num: &BigInt, den: &BigUint) -> f64 {
    let v = ratio_to_f64(num.magnitude(), den);
    if num.sign() == Sign::Minus {
        -v
    } else {
        v
    }
}

fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return 0.0;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Natural log of `C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k)
        .map(|i| ((n - k + i) as f64 / i as f64).ln())
        .sum()
}

/// Probability mass of `Binomial(n, p)` at `x`; zero outside `0..=n`.
pub fn binomial_pmf(x: i64, n: u64, p: f64) -> f64 {
    if x < 0 || x as u64 > n {
        return 0.0;
    }
    let x = x as u64;
    if p <= 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, x) + x as f64 * p.ln() + (n - x) as f64 * (-p).ln_1p()).exp()
}

/// `H(k, n | d)`: the number of ways to place `n` ones into `k` bins of width `d`
/// with every bin non-empty, tabulated for `k <= max_bins`, `n <= max_ones`.
///
/// Base case `H(0, 0) = 1`, `H(0, n > 0) = 0`.
#[derive(Debug, Clone)]
pub struct OccupancyTable {
    width: u64,
    max_ones: usize,
    table: Vec<Vec<BigUint>>,
}

impl OccupancyTable {
    pub fn new(width: u32, max_bins: u32, max_ones: u32) -> Self {
        let d = width as u64;
        let nmax = max_ones as usize;
        let choose: Vec<BigUint> = (0..=d).map(|i| binomial(d, i)).collect();
        let mut table = vec![vec![BigUint::zero(); nmax + 1]; max_bins as usize + 1];
        table[0][0] = BigUint::one();
        for k in 1..=max_bins as usize {
            for n in 0..=nmax {
                let lo = 1i64.max(n as i64 - (k as i64 - 1) * d as i64);
                let hi = (d as i64).min(n as i64 - k as i64 + 1);
                let mut acc = BigUint::zero();
                for i in lo..=hi {
                    let prev = &table[k - 1][n - i as usize];
                    if !prev.is_zero() {
                        acc += &choose[i as usize] * prev;
                    }
                }
                table[k][n] = acc;
            }
        }
        Self {
            width: d,
            max_ones: nmax,
            table,
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn max_bins(&self) -> u32 {
        (self.table.len() - 1) as u32
    }

    pub fn max_ones(&self) -> u32 {
        self.max_ones as u32
    }

    pub fn get(&self, bins: u32, ones: u32) -> &BigUint {
        &self.table[bins as usize][ones as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
        assert_eq!(binomial(1024, 1), BigUint::from(1024u32));
    }

    #[test]
    fn huge_ratio_is_accurate() {
        // C(1024, 512) / C(1024, 511) = 513 / 512.
        let r = ratio_to_f64(&binomial(1024, 512), &binomial(1024, 511));
        assert!((r - 513.0 / 512.0).abs() < 1e-15);
        let tiny = ratio_to_f64(&BigUint::one(), &binomial(1024, 512));
        assert!(tiny > 0.0 && tiny < 1e-300);
    }

    #[test]
    fn pmf_edges() {
        assert_eq!(binomial_pmf(-1, 5, 0.3), 0.0);
        assert_eq!(binomial_pmf(6, 5, 0.3), 0.0);
        assert_eq!(binomial_pmf(5, 5, 1.0), 1.0);
        assert_eq!(binomial_pmf(0, 5, 0.0), 1.0);
        let total: f64 = (0..=40).map(|x| binomial_pmf(x, 40, 0.17)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((binomial_pmf(2, 4, 0.5) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn occupancy_counts() {
        let h = OccupancyTable::new(2, 3, 6);
        assert_eq!(h.get(0, 0), &BigUint::one());
        assert_eq!(h.get(1, 2), &BigUint::one());
        assert_eq!(h.get(1, 1), &BigUint::from(2u32));
        assert_eq!(h.get(2, 2), &BigUint::from(4u32));
        assert_eq!(h.get(2, 3), &BigUint::from(4u32));
        assert_eq!(h.get(2, 5), &BigUint::zero());
        assert_eq!(h.get(3, 6), &BigUint::one());
    }
}
