use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::retrieval::{ground_truth, ground_truth_weighted, mean_and_stderr, retrieve, GroundTruth};
use crate::data::{
    binarize, filter_min_nnz, load_libsvm, BinaryDataset, SparseWeightedVector, WeightedDataset,
};
use crate::error::{Error, Result};
use crate::hasher::Hasher;
use crate::privacy::Variant;
use crate::randomness::{derive_seed, stream, Purpose};
use crate::sketch::Signature;

fn default_delta() -> f64 {
    1e-6
}

fn default_runs() -> usize {
    5
}

fn default_top() -> usize {
    50
}

/// Synthetic clustered corpus for smoke runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub dim: u32,
    pub clusters: usize,
    /// Nonzeros of each cluster center.
    pub nnz: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// libsvm file (optionally gzipped); relative paths resolve against the config file.
    pub dataset: Option<PathBuf>,
    /// Separate query file; otherwise queries are split off the dataset.
    pub queries: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    /// Dimension override.
    pub dim: Option<u32>,
    /// Zero-pad D to a multiple of every K.
    #[serde(default)]
    pub pad: bool,
    pub n_queries: Option<usize>,
    pub n_database: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub variants: Vec<Variant>,
    #[serde(rename = "K")]
    pub bins: Vec<u32>,
    pub b: Vec<u8>,
    /// `inf` runs without response noise.
    pub epsilon: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub f_min: u32,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(rename = "R")]
    pub r_grid: Vec<usize>,
    #[serde(default = "default_top")]
    pub top: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        match (&d.dataset, &d.synthetic) {
            (None, None) => return Err(Error::config("data", "set `dataset` or `synthetic`")),
            (Some(_), Some(_)) => return Err(Error::config("data", "`dataset` and `synthetic` are exclusive")),
            _ => {}
        }
        if d.synthetic.is_some() && d.queries.is_some() {
            return Err(Error::config("data.queries", "not supported with a synthetic corpus"));
        }
        if let Some(s) = &d.synthetic {
            if s.rows < 2 || s.clusters == 0 || s.nnz == 0 || s.nnz > s.dim {
                return Err(Error::config("data.synthetic", "need rows >= 2, clusters >= 1, 1 <= nnz <= dim"));
            }
        }
        if d.n_queries == Some(0) {
            return Err(Error::config("data.n_queries", "must be >= 1"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "empty"));
        }
        if self.bins.is_empty() || self.bins.contains(&0) {
            return Err(Error::config("K", "need at least one positive K"));
        }
        if self.b.is_empty() || self.b.iter().any(|&b| !(1..=16).contains(&b)) {
            return Err(Error::config("b", "values must lie in 1..=16"));
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::config("epsilon", "values must be > 0 (inf for no noise)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if self.f_min == 0 {
            return Err(Error::config("f_min", "must be >= 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be >= 1"));
        }
        if self.r_grid.is_empty() || self.r_grid.contains(&0) {
            return Err(Error::config("R", "need at least one positive R"));
        }
        if self.top == 0 {
            return Err(Error::config("top", "must be >= 1"));
        }
        Ok(())
    }
}

/// Filtered, split and padded data with exact ground truth.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dim: u32,
    pub queries: BinaryDataset,
    pub database: BinaryDataset,
    pub queries_weighted: WeightedDataset,
    pub database_weighted: WeightedDataset,
    pub truth: GroundTruth,
    pub truth_weighted: Option<GroundTruth>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<WeightedDataset> {
    let mut rng = stream(derive_seed(seed, Purpose::Split, 1, 0));
    let all: Vec<u32> = (1..=cfg.dim).collect();
    let centers: Vec<Vec<u32>> = (0..cfg.clusters)
        .map(|_| all.choose_multiple(&mut rng, cfg.nnz as usize).copied().collect())
        .collect();
    let mut vectors = Vec::with_capacity(cfg.rows);
    let mut labels = Vec::with_capacity(cfg.rows);
    for row in 0..cfg.rows {
        let c = row % cfg.clusters;
        let mut idx: Vec<u32> = centers[c].iter().copied().filter(|_| rng.gen::<f64>() < 0.8).collect();
        let extra = cfg.nnz as usize / 5;
        idx.extend((0..extra).map(|_| rng.gen_range(1..=cfg.dim)));
        idx.sort_unstable();
        idx.dedup();
        let entries = idx.into_iter().map(|i| (i, rng.gen_range(0.5..2.0))).collect();
        vectors.push(SparseWeightedVector::new(cfg.dim, entries)?);
        labels.push(Some(c.to_string()));
    }
    WeightedDataset::new(cfg.dim, vectors, labels)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads, pads, filters by `f_min` (both sides) and splits the data, then
/// computes exact ground truth.
pub fn prepare(
    data: &DataConfig,
    base_dir: &Path,
    bins: &[u32],
    f_min: u32,
    top: usize,
    weighted_truth: bool,
    seed: u64,
) -> Result<Prepared> {
    let (corpus, query_file) = match (&data.dataset, &data.synthetic) {
        (Some(path), _) => (
            load_libsvm(resolve(base_dir, path), data.dim)?,
            data.queries
                .as_ref()
                .map(|q| load_libsvm(resolve(base_dir, q), data.dim))
                .transpose()?,
        ),
        (None, Some(s)) => (synthetic(s, seed)?, None),
        (None, None) => return Err(Error::config("data", "set `dataset` or `synthetic`")),
    };
    let mut dim = corpus.dim().max(query_file.as_ref().map_or(0, |q| q.dim()));
    if data.pad {
        let lcm = bins.iter().fold(1u64, |l, &k| l / gcd(l, k as u64) * k as u64);
        dim = (dim as u64).div_ceil(lcm).saturating_mul(lcm).min(u32::MAX as u64) as u32;
    }
    let corpus = corpus.pad_to(dim)?;
    let (corpus, _) = filter_min_nnz(&corpus, f_min)?;

    let mut split = stream(derive_seed(seed, Purpose::Split, 0, 0));
    let (queries_w, database_w) = match query_file {
        Some(q) => {
            let (q, _) = filter_min_nnz(&q.pad_to(dim)?, f_min)?;
            let mut qpos: Vec<usize> = (0..q.len()).collect();
            qpos.shuffle(&mut split);
            qpos.truncate(data.n_queries.unwrap_or(q.len()));
            qpos.sort_unstable();
            let mut dpos: Vec<usize> = (0..corpus.len()).collect();
            dpos.shuffle(&mut split);
            dpos.truncate(data.n_database.unwrap_or(corpus.len()));
            dpos.sort_unstable();
            (q.select(&qpos), corpus.select(&dpos))
        }
        None => {
            let mut pos: Vec<usize> = (0..corpus.len()).collect();
            pos.shuffle(&mut split);
            let nq = data.n_queries.unwrap_or((corpus.len() / 10).max(1));
            if nq >= corpus.len() {
                return Err(Error::config(
                    "data.n_queries",
                    format!("{nq} queries leave no database out of {} vectors", corpus.len()),
                ));
            }
            let mut qpos = pos[..nq].to_vec();
            let rest = &pos[nq..];
            let mut dpos = rest[..data.n_database.unwrap_or(rest.len()).min(rest.len())].to_vec();
            qpos.sort_unstable();
            dpos.sort_unstable();
            (corpus.select(&qpos), corpus.select(&dpos))
        }
    };
    if queries_w.is_empty() || database_w.is_empty() {
        return Err(Error::config("data", format!("no queries or database vectors with at least {f_min} nonzeros")));
    }
    let queries = binarize(&queries_w);
    let database = binarize(&database_w);
    let truth = ground_truth(queries.vectors(), database.vectors(), database.ids(), top)?;
    let truth_weighted = weighted_truth
        .then(|| ground_truth_weighted(queries_w.vectors(), database_w.vectors(), database_w.ids(), top))
        .transpose()?;
    Ok(Prepared {
        dim,
        queries,
        database,
        queries_weighted: queries_w,
        database_weighted: database_w,
        truth,
        truth_weighted,
    })
}

/// One CSV row of a retrieval sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalRow {
    pub variant: Variant,
    pub bins: u32,
    pub bits: u8,
    pub epsilon: f64,
    pub delta: f64,
    pub f_min: u32,
    pub n: u32,
    pub r: usize,
    pub precision: f64,
    pub precision_se: f64,
    pub recall: f64,
    pub recall_se: f64,
    pub runs: usize,
}

pub const RETRIEVAL_HEADER: &str =
    "variant,K,b,epsilon,delta,f_min,N,R,precision,precision_se,recall,recall_se,runs\n";

pub fn retrieval_csv(rows: &[RetrievalRow]) -> String {
    let mut s = String::from(RETRIEVAL_HEADER);
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.variant,
            r.bins,
            r.bits,
            r.epsilon,
            r.delta,
            r.f_min,
            r.n,
            r.r,
            r.precision,
            r.precision_se,
            r.recall,
            r.recall_se,
            r.runs
        ));
    }
    s
}

/// Hash seed of run `run`; shared by every variant so comparisons reuse randomness.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    derive_seed(seed, Purpose::Replicate, run as u64, 0)
}

fn sketch_all(h: &Hasher, weighted: bool, bin: &BinaryDataset, w: &WeightedDataset) -> Result<Vec<Signature>> {
    if weighted {
        w.vectors().par_iter().map(|u| h.sketch_weighted(u)).collect()
    } else {
        bin.vectors().par_iter().map(|u| h.sketch(u)).collect()
    }
}

/// Precision/recall for one `(variant, K, b)` across the ε grid, averaged over runs.
#[allow(clippy::too_many_arguments)]
pub fn retrieval_sweep(
    prep: &Prepared,
    variant: Variant,
    bins: u32,
    bits: u8,
    eps_grid: &[f64],
    delta: f64,
    f_min: u32,
    runs: usize,
    r_grid: &[usize],
    seed: u64,
) -> Result<Vec<RetrievalRow>> {
    let weighted = variant == Variant::BcwsRand;
    let truth = if weighted {
        prep.truth_weighted
            .as_ref()
            .ok_or_else(|| Error::Precondition("weighted ground truth was not prepared".into()))?
    } else {
        &prep.truth
    };
    let db_ids = prep.database.ids();
    // metrics[e][run] = (precision per R, recall per R)
    let mut metrics = vec![Vec::with_capacity(runs); eps_grid.len()];
    let mut ns = vec![0; eps_grid.len()];
    for run in 0..runs {
        let hseed = run_seed(seed, run);
        let h = Hasher::new(variant, hseed, prep.dim, bins, bits)?;
        let q = sketch_all(&h, weighted, &prep.queries, &prep.queries_weighted)?;
        let d = sketch_all(&h, weighted, &prep.database, &prep.database_weighted)?;
        for (e, &eps) in eps_grid.iter().enumerate() {
            let p = h.privatizer(eps, if variant.is_pure() { 0.0 } else { delta }, f_min)?;
            ns[e] = p.discount().n;
            let noise = derive_seed(hseed, Purpose::Noise, e as u64, 0);
            let privatize = |sigs: &[Signature], side: u64| -> Result<Vec<Signature>> {
                sigs.par_iter()
                    .enumerate()
                    .map(|(i, s)| p.privatize(s, &mut stream(derive_seed(noise, Purpose::Noise, side, i as u64))))
                    .collect()
            };
            let res = retrieve(&privatize(&q, 0)?, &privatize(&d, 1)?, db_ids, truth, r_grid)?;
            metrics[e].push((res.precision, res.recall));
        }
    }
    let mut rows = Vec::new();
    for (e, &eps) in eps_grid.iter().enumerate() {
        for (i, &r) in r_grid.iter().enumerate() {
            let prec: Vec<f64> = metrics[e].iter().map(|m| m.0[i]).collect();
            let rec: Vec<f64> = metrics[e].iter().map(|m| m.1[i]).collect();
            let (precision, precision_se) = mean_and_stderr(&prec);
            let (recall, recall_se) = mean_and_stderr(&rec);
            rows.push(RetrievalRow {
                variant,
                bins,
                bits,
                epsilon: eps,
                delta: if variant.is_pure() { 0.0 } else { delta },
                f_min,
                n: ns[e],
                r,
                precision,
                precision_se,
                recall,
                recall_se,
                runs,
            });
        }
    }
    Ok(rows)
}

/// Full pipeline for a parsed config; relative data paths resolve against `base_dir`.
pub fn run_experiment_config(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<RetrievalRow>> {
    cfg.validate()?;
    let weighted = cfg.variants.contains(&Variant::BcwsRand);
    let prep = prepare(&cfg.data, base_dir, &cfg.bins, cfg.f_min, cfg.top, weighted, cfg.seed)?;
    let mut rows = Vec::new();
    for &variant in &cfg.variants {
        for &k in &cfg.bins {
            for &b in &cfg.b {
                rows.extend(retrieval_sweep(
                    &prep, variant, k, b, &cfg.epsilon, cfg.delta, cfg.f_min, cfg.runs, &cfg.r_grid, cfg.seed,
                )?);
            }
        }
    }
    Ok(rows)
}

/// Reads a TOML config and returns the metrics CSV.
pub fn run_experiment(config_path: impl AsRef<Path>) -> Result<String> {
    let path = config_path.as_ref();
    let cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(retrieval_csv(&run_experiment_config(&cfg, base)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
seed = 3
variants = ["oph-re", "mh", "oph-rand", "bcws"]
K = [16]
b = [2]
epsilon = [5.0, inf]
f_min = 5
runs = 2
R = [5, 10]
top = 10

[data]
synthetic = { rows = 80, dim = 256, clusters = 8, nnz = 20 }
n_queries = 10
"#;

    #[test]
    fn config_parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(SMOKE).unwrap();
        assert_eq!(cfg.bins, vec![16]);
        assert_eq!(cfg.delta, 1e-6);
        assert!(cfg.epsilon[1].is_infinite());
        let bad = SMOKE.replace("runs = 2", "runs = 0");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config { field, .. }) if field == "runs"));
        let unknown = SMOKE.replace("runs = 2", "runz = 2");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(Error::Config { .. })));
        let variant = SMOKE.replace("\"mh\"", "\"mhx\"");
        assert!(ExperimentConfig::from_toml(&variant).is_err());
    }

    #[test]
    fn smoke_experiment_is_deterministic() {
        let cfg = ExperimentConfig::from_toml(SMOKE).unwrap();
        let a = retrieval_csv(&run_experiment_config(&cfg, Path::new(".")).unwrap());
        let b = retrieval_csv(&run_experiment_config(&cfg, Path::new(".")).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(RETRIEVAL_HEADER));
        assert_eq!(a.lines().count(), 1 + 4 * 2 * 2);
    }

    #[test]
    fn unpadded_dimension_must_divide() {
        let cfg = ExperimentConfig::from_toml(&SMOKE.replace("K = [16]", "K = [24]")).unwrap();
        let err = run_experiment_config(&cfg, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Divisibility { padded: 264, .. }));
        let padded = SMOKE.replace("K = [16]", "K = [24]").replace("n_queries = 10", "n_queries = 10\npad = true");
        let cfg = ExperimentConfig::from_toml(&padded).unwrap();
        assert!(run_experiment_config(&cfg, Path::new(".")).is_ok());
    }
}
