//! Jaccard estimators over signatures and the MSE simulation study.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::SparseBinaryVector;
use crate::error::{Error, Result};
use crate::hasher::Hasher;
use crate::privacy::{Privatizer, Variant};
use crate::randomness::{derive_seed, stream, Purpose};
use crate::sketch::{Signature, SignatureMeta};

/// Parameters of the debiasing map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub bits: u8,
    pub p_keep: f64,
    pub debias: bool,
}

impl EstimatorConfig {
    pub fn from_privatizer(p: &Privatizer) -> Self {
        Self {
            bits: p.budget().bits,
            p_keep: p.keep_probability(),
            debias: true,
        }
    }

    /// No response noise: only the b-bit chance collisions are removed.
    pub fn non_private(bits: u8) -> Self {
        Self {
            bits,
            p_keep: 1.0,
            debias: true,
        }
    }
}

fn check_comparable(a: &SignatureMeta, b: &SignatureMeta) -> Result<()> {
    if a != b {
        return Err(Error::Comparability(format!(
            "{} (D = {}, K = {}, b = {:?}, seed = {}) vs {} (D = {}, K = {}, b = {:?}, seed = {})",
            a.scheme, a.dim, a.bins, a.bits, a.seed, b.scheme, b.dim, b.bins, b.bits, b.seed
        )));
    }
    Ok(())
}

/// Number of agreeing slots; EMPTY agrees only with EMPTY.
pub fn collision_count(s: &Signature, t: &Signature) -> Result<usize> {
    check_comparable(s.meta(), t.meta())?;
    Ok(s.slots().iter().zip(t.slots()).filter(|(a, b)| a == b).count())
}

/// Fraction of agreeing slots.
pub fn collision_estimate(s: &Signature, t: &Signature) -> Result<f64> {
    Ok(collision_count(s, t)? as f64 / s.len() as f64)
}

/// `(2^b - 1)(2^b Ĵ - 1) / (2^b p - 1)^2`, not clamped.
pub fn debias(j_hat: f64, cfg: &EstimatorConfig) -> Result<f64> {
    if !cfg.debias {
        return Ok(j_hat);
    }
    let cells = (1u64 << cfg.bits) as f64;
    let gap = cells * cfg.p_keep - 1.0;
    if !(gap > 0.0) {
        return Err(Error::DegenerateBudget {
            p_keep: cfg.p_keep,
            bits: cfg.bits,
        });
    }
    Ok((cells - 1.0) * (cells * j_hat - 1.0) / (gap * gap))
}

/// Two vectors with `f` nonzeros each and Jaccard `j`: shared indices first,
/// then the private blocks of `u` and `v`.
pub fn jaccard_pair(dim: u32, f: u32, j: f64) -> Result<(SparseBinaryVector, SparseBinaryVector)> {
    if !(0.0..=1.0).contains(&j) || f == 0 {
        return Err(Error::Parameter(format!("need f >= 1 and J in [0, 1], got f = {f}, J = {j}")));
    }
    let a_real = 2.0 * f as f64 * j / (1.0 + j);
    let a = a_real.round();
    if (a - a_real).abs() > 1e-9 {
        let near = nearest_feasible_f(f, j);
        return Err(Error::Parameter(format!(
            "J = {j} needs an intersection of {a_real:.3} with f = {f}; try f = {near}"
        )));
    }
    let a = a as u32;
    let union = 2 * f - a;
    if union > dim {
        return Err(Error::Parameter(format!("pair needs {union} coordinates, D = {dim}")));
    }
    let u = (1..=f).collect();
    let v = (1..=a).chain(f + 1..=union).collect();
    Ok((SparseBinaryVector::new(dim, u)?, SparseBinaryVector::new(dim, v)?))
}

fn nearest_feasible_f(f: u32, j: f64) -> u32 {
    (1..=2 * f + 2)
        .filter(|&g| {
            let a = 2.0 * g as f64 * j / (1.0 + j);
            (a - a.round()).abs() <= 1e-9
        })
        .min_by_key(|&g| (g as i64 - f as i64).abs())
        .unwrap_or(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseConfig {
    pub dim: u32,
    pub bins: u32,
    pub bits: u8,
    pub jaccard: f64,
    pub f_grid: Vec<u32>,
    pub eps_grid: Vec<f64>,
    pub delta: f64,
    pub replicates: usize,
    pub variants: Vec<Variant>,
    pub seed: u64,
}

impl MseConfig {
    pub fn new(dim: u32, bins: u32, bits: u8, f_grid: Vec<u32>, eps_grid: Vec<f64>) -> Self {
        Self {
            dim,
            bins,
            bits,
            jaccard: 1.0 / 3.0,
            f_grid,
            eps_grid,
            delta: 1e-6,
            replicates: 10_000,
            variants: vec![Variant::OphFix, Variant::OphRe, Variant::MinHash],
            seed: 0,
        }
    }
}

/// One row of the MSE table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub variant: Variant,
    pub f: u32,
    pub epsilon: f64,
    pub mse: f64,
    pub stderr: f64,
    /// Mean debiased estimate and its standard error, for bias checks.
    pub mean: f64,
    pub mean_stderr: f64,
    pub replicates: usize,
}

/// Empirical MSE of the debiased estimator per `(variant, f, ε)`.
///
/// Replicate `r` draws fresh hashing randomness from the master seed; the
/// response noise of replicate `r` is shared by all variants, so the
/// comparison between variants uses common random numbers.
pub fn mse_sim(cfg: &MseConfig) -> Result<Vec<MseRow>> {
    if cfg.replicates == 0 {
        return Err(Error::Parameter("replicates must be >= 1".into()));
    }
    if cfg.variants.iter().any(|v| v.is_pure()) {
        return Err(Error::Parameter("the MSE study covers oph-fix, oph-re and mh".into()));
    }
    let pairs = cfg
        .f_grid
        .iter()
        .map(|&f| jaccard_pair(cfg.dim, f, cfg.jaccard))
        .collect::<Result<Vec<_>>>()?;
    // Privatizers depend only on geometry and budget.
    let mut cells = Vec::new();
    for &variant in &cfg.variants {
        let probe = Hasher::new(variant, cfg.seed, cfg.dim, cfg.bins, cfg.bits)?;
        for (fi, &f) in cfg.f_grid.iter().enumerate() {
            for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
                let p = probe.privatizer(eps, cfg.delta, f)?;
                cells.push((variant, fi, ei, p, EstimatorConfig::from_privatizer(&p)));
            }
        }
    }

    let per_replicate: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let hash_seed = derive_seed(cfg.seed, Purpose::Replicate, r as u64, 0);
            let mut out = Vec::with_capacity(cells.len());
            let mut current: Option<(Variant, Hasher, Vec<(Signature, Signature)>)> = None;
            for (variant, fi, ei, privatizer, est) in &cells {
                if current.as_ref().map(|c| c.0) != Some(*variant) {
                    let h = Hasher::new(*variant, hash_seed, cfg.dim, cfg.bins, cfg.bits)?;
                    let coded = pairs
                        .iter()
                        .map(|(u, v)| Ok((h.sketch(u)?, h.sketch(v)?)))
                        .collect::<Result<Vec<_>>>()?;
                    current = Some((*variant, h, coded));
                }
                let (_, _, coded) = current.as_ref().unwrap();
                let noise = derive_seed(cfg.seed, Purpose::Noise, r as u64, (*fi as u64) << 32 | *ei as u64);
                let mut rng = stream(noise);
                let s = privatizer.privatize(&coded[*fi].0, &mut rng)?;
                let t = privatizer.privatize(&coded[*fi].1, &mut rng)?;
                out.push(debias(collision_estimate(&s, &t)?, est)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.replicates as f64;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, (variant, fi, ei, _, _))| {
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut sq2 = 0.0;
            let mut centered = 0.0;
            for rep in &per_replicate {
                let e = rep[c] - cfg.jaccard;
                sum += rep[c];
                centered += e;
                sq += e * e;
                sq2 += e * e * e * e;
            }
            let mse = sq / n;
            let (var, est_var) = if cfg.replicates > 1 {
                let bias = centered / n;
                (
                    (sq2 / n - mse * mse).max(0.0) * n / (n - 1.0),
                    (mse - bias * bias).max(0.0) * n / (n - 1.0),
                )
            } else {
                (0.0, 0.0)
            };
            MseRow {
                variant: *variant,
                f: cfg.f_grid[*fi],
                epsilon: cfg.eps_grid[*ei],
                mse,
                stderr: (var / n).sqrt(),
                mean: sum / n,
                mean_stderr: (est_var / n).sqrt(),
                replicates: cfg.replicates,
            }
        })
        .collect())
}

/// CSV with columns `variant,f,epsilon,mse,stderr,replicates`.
pub fn mse_csv(rows: &[MseRow]) -> String {
    let mut s = String::from("variant,f,epsilon,mse,stderr,replicates\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.10e},{:.10e},{}\n",
            r.variant, r.f, r.epsilon, r.mse, r.stderr, r.replicates
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::jaccard;
    use crate::sketch::{Scheme, Slot};

    fn sig(slots: Vec<Slot>) -> Signature {
        let meta = SignatureMeta {
            scheme: Scheme::OphRe,
            dim: 16,
            bins: slots.len() as u32,
            bits: Some(2),
            seed: 0,
        };
        Signature::new(meta, slots).unwrap()
    }

    #[test]
    fn collision_examples() {
        let a = sig(vec![Slot::Code(0), Slot::Code(1), Slot::Code(2), Slot::Code(3)]);
        let b = sig(vec![Slot::Code(0), Slot::Code(1), Slot::Code(2), Slot::Code(0)]);
        let c = sig(vec![Slot::Code(1), Slot::Code(0), Slot::Code(3), Slot::Code(2)]);
        assert_eq!(collision_estimate(&a, &a).unwrap(), 1.0);
        assert_eq!(collision_estimate(&a, &b).unwrap(), 0.75);
        assert_eq!(collision_estimate(&a, &c).unwrap(), 0.0);
        let e = sig(vec![Slot::Empty, Slot::Code(1), Slot::Empty, Slot::Code(3)]);
        let f = sig(vec![Slot::Empty, Slot::Code(1), Slot::Code(0), Slot::Code(3)]);
        assert_eq!(collision_estimate(&e, &f).unwrap(), 0.75);
    }

    #[test]
    fn mismatched_meta_is_rejected() {
        let a = sig(vec![Slot::Code(0); 4]);
        let b = sig(vec![Slot::Code(0); 3]);
        assert!(matches!(collision_estimate(&a, &b), Err(Error::Comparability(_))));
    }

    #[test]
    fn debias_examples() {
        let cfg = |bits, p_keep| EstimatorConfig { bits, p_keep, debias: true };
        assert_eq!(debias(1.0, &cfg(1, 1.0)).unwrap(), 1.0);
        assert_eq!(debias(0.25, &cfg(2, 0.6)).unwrap(), 0.0);
        assert!((debias(0.625, &cfg(1, 0.75)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(debias(0.5, &cfg(1, 0.5)), Err(Error::DegenerateBudget { .. })));
        let c = cfg(2, 0.7);
        let xs: Vec<f64> = (0..=10).map(|i| debias(i as f64 / 10.0, &c).unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pair_construction() {
        let (u, v) = jaccard_pair(1024, 100, 1.0 / 3.0).unwrap();
        assert_eq!(u.nnz(), 100);
        assert_eq!(v.nnz(), 100);
        assert!((jaccard(&u, &v) - 1.0 / 3.0).abs() < 1e-15);
        let err = jaccard_pair(1024, 101, 1.0 / 3.0).unwrap_err().to_string();
        assert!(err.contains("try f = 100") || err.contains("try f = 102"), "{err}");
        assert!(jaccard_pair(100, 80, 1.0 / 3.0).is_err());
    }

    #[test]
    fn mse_sim_is_deterministic_and_near_variance_at_huge_epsilon() {
        let mut cfg = MseConfig::new(128, 16, 2, vec![16], vec![1e9]);
        cfg.replicates = 2000;
        cfg.variants = vec![Variant::MinHash];
        let a = mse_sim(&cfg).unwrap();
        let b = mse_sim(&cfg).unwrap();
        assert_eq!(a, b);
        // b-bit MinHash variance: Var of the debiased b=2 estimate.
        let j = 1.0 / 3.0;
        let pc = j + (1.0 - j) / 4.0;
        let expected = pc * (1.0 - pc) / 16.0 * (4.0f64 / 3.0).powi(2);
        assert!((a[0].mse / expected - 1.0).abs() < 0.15, "{} vs {expected}", a[0].mse);
        assert!(mse_csv(&a).starts_with("variant,f,epsilon,mse,stderr,replicates\nmh,16,1000000000,"));
    }
}
