//! Distribution of the number of differing hash values between neighbors,
//! and the discount factor `N` derived from it.

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

use super::combinatorics::{binomial, binomial_pmf, ratio_to_f64, signed_ratio_to_f64, OccupancyTable};
use super::Variant;
use crate::error::{Error, Result};
use crate::randomness::check_divides;

const MASS_TOLERANCE: f64 = 1e-9;
const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// A finite distribution over ascending integer support points.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl PmfTable {
    /// Validates the table, clamping negatives within `-1e-12` to zero.
    pub fn new(support: Vec<u32>, mut probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(Error::Numerics("support and probabilities differ in length".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Numerics("support is not ascending".into()));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < NEGATIVE_TOLERANCE {
                return Err(Error::Numerics(format!("invalid probability {p}")));
            }
            *p = p.max(0.0);
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Numerics(format!("probabilities sum to {mass}")));
        }
        Ok(Self { support, probs })
    }

    fn contiguous(start: u32, probs: Vec<f64>) -> Result<Self> {
        let support = (start..start + probs.len() as u32).collect();
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: u32) -> f64 {
        self.support
            .binary_search(&x)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, p)| x as f64 * p).sum()
    }

    /// Smallest support point `x` whose cumulative mass reaches `1 - delta`.
    ///
    /// Evaluated as the smallest `x` with upper tail `P(X > x) <= delta`, which
    /// avoids forming `1 - delta` when `delta` is tiny.
    pub fn upper_quantile(&self, delta: f64) -> u32 {
        let mut tail = 0.0;
        for i in (0..self.support.len()).rev() {
            if tail + self.probs[i] > delta {
                return self.support[i];
            }
            tail += self.probs[i];
        }
        self.support[0]
    }

    pub fn total_variation(&self, other: &[(u32, f64)]) -> f64 {
        let mut all: Vec<u32> = self.support.clone();
        all.extend(other.iter().map(|o| o.0));
        all.sort_unstable();
        all.dedup();
        let q = |x: u32| other.iter().filter(|o| o.0 == x).map(|o| o.1).sum::<f64>();
        0.5 * all.iter().map(|&x| (self.prob(x) - q(x)).abs()).sum::<f64>()
    }
}

fn check_grid(dim: u32, bins: u32, nnz: u32) -> Result<u32> {
    check_divides(dim, bins)?;
    if nnz == 0 || nnz > dim {
        return Err(Error::Parameter(format!("need 1 <= f <= D, got f = {nnz}, D = {dim}")));
    }
    Ok(dim / bins)
}

/// Range of the number of empty bins: `max(0, K-f) ..= K - ceil(f/d)`.
fn empty_range(bins: u32, width: u32, nnz: u32) -> (u32, u32) {
    (bins.saturating_sub(nnz), bins - nnz.div_ceil(width))
}

/// Exact law of the number of empty bins when `f` ones are spread over `[D]`.
///
/// The alternating inclusion-exclusion sum is evaluated in exact integer
/// arithmetic and divided by `C(D, f)` once at the end.
pub fn pmf_num_empty(dim: u32, bins: u32, nnz: u32) -> Result<PmfTable> {
    let width = check_grid(dim, bins, nnz)?;
    let (lo, hi) = empty_range(bins, width, nnz);
    let (dim, k_all, f) = (dim as u64, bins as u64, nnz as u64);
    let d = width as u64;
    let total = binomial(dim, f);
    // C(D - s d, f) for s = 0..=K
    let tail: Vec<BigInt> = (0..=k_all).map(|s| BigInt::from(binomial(dim - s * d, f))).collect();
    let probs = (lo as u64..=hi as u64)
        .map(|j| {
            let choose_j = BigInt::from(binomial(k_all, j));
            let mut acc = BigInt::zero();
            for l in 0..=(k_all - j) {
                let term = BigInt::from(binomial(k_all - j, l)) * &tail[(j + l) as usize];
                if l % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            signed_ratio_to_f64(&(acc * choose_j), &total)
        })
        .collect();
    PmfTable::contiguous(lo, probs)
}

fn bin_nnz_range(width: u32, nnz: u32, nonempty: u32) -> Option<(u32, u32)> {
    let lo = 1i64.max(nnz as i64 - (nonempty as i64 - 1) * width as i64);
    let hi = (width as i64).min(nnz as i64 - nonempty as i64 + 1);
    (lo <= hi).then_some((lo as u32, hi as u32))
}

fn bin_nnz_probs(table: &OccupancyTable, nnz: u32, nonempty: u32) -> Option<(u32, Vec<f64>)> {
    let width = table.width() as u32;
    let (lo, hi) = bin_nnz_range(width, nnz, nonempty)?;
    let total = table.get(nonempty, nnz);
    if total.is_zero() {
        return None;
    }
    let probs = (lo..=hi)
        .map(|j| {
            let count: BigUint = binomial(width as u64, j as u64) * table.get(nonempty - 1, nnz - j);
            ratio_to_f64(&count, total)
        })
        .collect();
    Some((lo, probs))
}

/// Law of the number of ones in one non-empty bin given `m` non-empty bins of width `d`.
pub fn pmf_bin_nnz(width: u32, nnz: u32, nonempty: u32) -> Result<PmfTable> {
    if width == 0 || nonempty == 0 {
        return Err(Error::Parameter("need d >= 1 and m >= 1".into()));
    }
    if nnz < nonempty || nnz > nonempty * width {
        return Err(Error::Parameter(format!(
            "f = {nnz} ones cannot fill exactly m = {nonempty} bins of width {width}"
        )));
    }
    let table = OccupancyTable::new(width, nonempty, nnz);
    let (lo, probs) = bin_nnz_probs(&table, nnz, nonempty)
        .ok_or_else(|| Error::Parameter("empty support".into()))?;
    PmfTable::contiguous(lo, probs)
}

/// Probability that one slot's b-bit codes differ when the affected bin holds `z` ones.
pub fn p_neq(z: u32, bits: u8) -> f64 {
    (1.0 - 0.5f64.powi(bits as i32)) / z as f64
}

/// Law of `X`, the number of differing densified hash values between a vector
/// with `f` ones and a neighbor, for fixed or re-randomized densification.
///
/// The support runs over `0 ..= min(K, K - ceil(f/d) + 1)`: with `j` empty
/// bins `X` can reach `j + 1`.
pub fn pmf_diff_count(dim: u32, bins: u32, nnz: u32, bits: u8, variant: Variant) -> Result<PmfTable> {
    if !matches!(variant, Variant::OphFix | Variant::OphRe) {
        return Err(Error::Parameter(format!(
            "the differing-count law is defined for oph-fix and oph-re, not {variant}"
        )));
    }
    crate::randomness::check_bits(bits)?;
    let width = check_grid(dim, bins, nnz)?;
    let empties = pmf_num_empty(dim, bins, nnz)?;
    let (_, hi) = empty_range(bins, width, nnz);
    let x_max = bins.min(hi + 1);
    let table = OccupancyTable::new(width, bins, nnz);
    let mut probs = vec![0.0f64; x_max as usize + 1];

    for (j, p_j) in empties.iter() {
        if p_j == 0.0 {
            continue;
        }
        let m = bins - j;
        let Some((z_lo, z_probs)) = bin_nnz_probs(&table, nnz, m) else {
            continue;
        };
        for (z, p_z) in (z_lo..).zip(z_probs) {
            let weight = p_j * p_z;
            if weight == 0.0 {
                continue;
            }
            let pn = p_neq(z, bits);
            for (x, slot) in probs.iter_mut().enumerate() {
                let x = x as i64;
                let cond = match variant {
                    Variant::OphFix => {
                        let pick = 1.0 / m as f64;
                        if x == 0 {
                            1.0 - pn
                        } else {
                            pn * binomial_pmf(x - 1, j as u64, pick)
                        }
                    }
                    _ => {
                        let q = pn / m as f64;
                        (1.0 - pn) * binomial_pmf(x, j as u64, q)
                            + pn * binomial_pmf(x - 1, j as u64, q)
                    }
                };
                *slot += cond * weight;
            }
        }
    }
    PmfTable::contiguous(0, probs)
}

/// Privacy discount factor `N` and the inputs it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountFactor {
    pub n: u32,
    pub dim: u32,
    pub bins: u32,
    pub f_min: u32,
    pub bits: u8,
    pub delta: f64,
    pub variant: Variant,
}

/// Exact `Binomial(K, 1/f)` law, the count of differing MinHash values.
pub fn pmf_minhash_diff(bins: u32, f_min: u32) -> Result<PmfTable> {
    if f_min == 0 {
        return Err(Error::Parameter("f_min must be >= 1".into()));
    }
    let p = 1.0 / f_min as f64;
    let probs = (0..=bins as i64).map(|x| binomial_pmf(x, bins as u64, p)).collect();
    PmfTable::contiguous(0, probs)
}

/// `N = F^{-1}(1 - δ)` for the variant's differing-count law, clamped to at least 1.
///
/// The random-bit variants change at most one hash value, so their `N` is 1.
pub fn discount_factor(
    dim: u32,
    bins: u32,
    f_min: u32,
    bits: u8,
    delta: f64,
    variant: Variant,
) -> Result<DiscountFactor> {
    let n = match variant {
        Variant::OphRand | Variant::BcwsRand => 1,
        _ => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
            }
            let pmf = match variant {
                Variant::MinHash => pmf_minhash_diff(bins, f_min)?,
                _ => pmf_diff_count(dim, bins, f_min, bits, variant)?,
            };
            pmf.upper_quantile(delta).max(1)
        }
    };
    Ok(DiscountFactor {
        n,
        dim,
        bins,
        f_min,
        bits,
        delta,
        variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn num_empty_examples() {
        let t = pmf_num_empty(4, 2, 1).unwrap();
        assert_eq!(t.support(), &[1]);
        assert_close(t.prob(1), 1.0);

        let t = pmf_num_empty(4, 2, 2).unwrap();
        assert_close(t.prob(0), 2.0 / 3.0);
        assert_close(t.prob(1), 1.0 / 3.0);

        let t = pmf_num_empty(12, 3, 12).unwrap();
        assert_eq!(t.support(), &[0]);
        assert_close(t.prob(0), 1.0);
    }

    #[test]
    fn num_empty_rejects_bad_grid() {
        assert!(matches!(pmf_num_empty(10, 3, 2), Err(Error::Divisibility { .. })));
        assert!(pmf_num_empty(12, 3, 0).is_err());
        assert!(pmf_num_empty(12, 3, 13).is_err());
    }

    #[test]
    fn num_empty_large_dimension_is_stable() {
        for f in [16, 64, 128, 512, 1000] {
            let t = pmf_num_empty(1024, 64, f).unwrap();
            assert!(t.probs().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn num_empty_agrees_with_occupancy_counts() {
        // Second route: P(N_emp = j) = C(K, j) H(K - j, f) / C(D, f).
        for (dim, bins, f) in [(64u32, 8u32, 8u32), (1024, 64, 100), (96, 12, 30)] {
            let t = pmf_num_empty(dim, bins, f).unwrap();
            let h = OccupancyTable::new(dim / bins, bins, f);
            for (j, p) in t.iter() {
                let count = binomial(bins as u64, j as u64) * h.get(bins - j, f);
                let q = ratio_to_f64(&count, &binomial(dim as u64, f as u64));
                assert!((p - q).abs() < 1e-13, "D={dim} K={bins} f={f} j={j}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn bin_nnz_examples() {
        let t = pmf_bin_nnz(2, 2, 2).unwrap();
        assert_eq!(t.support(), &[1]);
        assert_close(t.prob(1), 1.0);

        let t = pmf_bin_nnz(2, 3, 2).unwrap();
        assert_close(t.prob(1), 0.5);
        assert_close(t.prob(2), 0.5);

        let t = pmf_bin_nnz(5, 4, 1).unwrap();
        assert_eq!(t.support(), &[4]);
        assert_close(t.prob(4), 1.0);

        assert!(pmf_bin_nnz(2, 5, 2).is_err());
        assert!(pmf_bin_nnz(2, 1, 2).is_err());
    }

    #[test]
    fn p_neq_examples() {
        assert_close(p_neq(1, 1), 0.5);
        assert_close(p_neq(4, 2), 0.1875);
        assert!((p_neq(3, 16) - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn diff_count_single_bin() {
        for variant in [Variant::OphFix, Variant::OphRe] {
            for (f, bits) in [(1u32, 1u8), (3, 1), (5, 2), (8, 4)] {
                let t = pmf_diff_count(8, 1, f, bits, variant).unwrap();
                let p1 = (1.0 - 0.5f64.powi(bits as i32)) / f as f64;
                assert_close(t.prob(1), p1);
                assert_close(t.prob(0), 1.0 - p1);
            }
        }
    }

    #[test]
    fn diff_count_mass_on_grids() {
        for variant in [Variant::OphFix, Variant::OphRe] {
            for (dim, bins) in [(64u32, 8u32), (60, 6), (128, 16), (1024, 64)] {
                for f in [1, 2, 5, bins / 2 + 1, bins, 3 * bins, dim / 2, dim] {
                    for bits in [1u8, 2, 4] {
                        let t = pmf_diff_count(dim, bins, f, bits, variant).unwrap();
                        let mass: f64 = t.probs().iter().sum();
                        assert!((mass - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
        assert!(pmf_diff_count(64, 8, 8, 1, Variant::MinHash).is_err());
    }

    #[test]
    fn upper_quantile_semantics() {
        let t = PmfTable::new(vec![0, 1, 2], vec![0.5, 0.4, 0.1]).unwrap();
        assert_eq!(t.upper_quantile(0.2), 1);
        assert_eq!(t.upper_quantile(0.1), 1);
        assert_eq!(t.upper_quantile(0.05), 2);
        assert_eq!(t.upper_quantile(0.6), 0);
        assert!(PmfTable::new(vec![0, 1], vec![0.5, 0.4]).is_err());
        assert!(PmfTable::new(vec![0, 1], vec![1.1, -0.1]).is_err());
        let clamped = PmfTable::new(vec![0, 1], vec![1.0 + 1e-13, -1e-13]).unwrap();
        assert_eq!(clamped.prob(1), 0.0);
    }

    #[test]
    fn minhash_discount_examples() {
        let n = discount_factor(1024, 64, 1, 1, 1e-6, Variant::MinHash).unwrap();
        assert_eq!(n.n, 64);
        let n = discount_factor(1024, 64, 50, 1, 0.999, Variant::MinHash).unwrap();
        assert_eq!(n.n, 1);
        let n = discount_factor(1024, 64, 50, 2, 1e-6, Variant::OphRand).unwrap();
        assert_eq!(n.n, 1);
        assert!(discount_factor(1024, 64, 50, 2, 0.0, Variant::OphRe).is_err());
    }

    #[test]
    fn discount_monotone_in_f_and_k() {
        for variant in [Variant::OphFix, Variant::OphRe, Variant::MinHash] {
            let ns: Vec<u32> = [8u32, 16, 32, 64, 128, 256]
                .iter()
                .map(|&f| discount_factor(512, 32, f, 1, 1e-6, variant).unwrap().n)
                .collect();
            assert!(ns.windows(2).all(|w| w[0] >= w[1]), "{variant}: {ns:?}");
            let ks: Vec<u32> = [8u32, 16, 32, 64]
                .iter()
                .map(|&k| discount_factor(512, k, 64, 1, 1e-6, variant).unwrap().n)
                .collect();
            assert!(ks.windows(2).all(|w| w[0] <= w[1]), "{variant}: {ks:?}");
        }
    }
}
