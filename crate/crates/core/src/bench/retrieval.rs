use rayon::prelude::*;
use serde::Serialize;

use crate::data::{intersection_size, weighted_jaccard, SparseBinaryVector, SparseWeightedVector};
use crate::error::{Error, Result};
use crate::estimate::collision_count;
use crate::sketch::Signature;

/// Per query, the database positions of the `top` most similar vectors,
/// ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub top: usize,
    pub neighbors: Vec<Vec<usize>>,
}

fn top_by_score(scores: impl Iterator<Item = f64>, ids: &[usize], top: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize, usize)> = scores
        .zip(ids)
        .enumerate()
        .map(|(pos, (s, &id))| (s, id, pos))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    order.truncate(top);
    order.into_iter().map(|(_, _, pos)| pos).collect()
}

fn check_dims(q: u32, db: u32) -> Result<()> {
    if q != db {
        return Err(Error::Comparability(format!("query dimension {q} vs database dimension {db}")));
    }
    Ok(())
}

/// Exact binary Jaccard ground truth.
pub fn ground_truth(
    queries: &[SparseBinaryVector],
    db: &[SparseBinaryVector],
    db_ids: &[usize],
    top: usize,
) -> Result<GroundTruth> {
    if let (Some(q), Some(d)) = (queries.first(), db.first()) {
        check_dims(q.dim(), d.dim())?;
    }
    let neighbors = queries
        .par_iter()
        .map(|q| {
            let scores = db.iter().map(|v| {
                let inter = intersection_size(q.indices(), v.indices());
                let union = q.nnz() + v.nnz() - inter;
                if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                }
            });
            top_by_score(scores, db_ids, top)
        })
        .collect();
    Ok(GroundTruth { top, neighbors })
}

/// Exact weighted Jaccard ground truth.
pub fn ground_truth_weighted(
    queries: &[SparseWeightedVector],
    db: &[SparseWeightedVector],
    db_ids: &[usize],
    top: usize,
) -> Result<GroundTruth> {
    if let (Some(q), Some(d)) = (queries.first(), db.first()) {
        check_dims(q.dim(), d.dim())?;
    }
    let neighbors = queries
        .par_iter()
        .map(|q| top_by_score(db.iter().map(|v| weighted_jaccard(q, v)), db_ids, top))
        .collect();
    Ok(GroundTruth { top, neighbors })
}

/// Metrics of one retrieval pass, averaged over queries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub r_grid: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Per query, the database positions ranked by estimated similarity (truncated to max R).
    #[serde(skip)]
    pub rankings: Vec<Vec<usize>>,
}

/// Ranks the database by collision count for each query and scores the
/// rankings against `truth`.
pub fn retrieve(
    query_sigs: &[Signature],
    db_sigs: &[Signature],
    db_ids: &[usize],
    truth: &GroundTruth,
    r_grid: &[usize],
) -> Result<RetrievalResult> {
    if query_sigs.len() != truth.neighbors.len() {
        return Err(Error::Parameter(format!(
            "{} query signatures for {} ground-truth lists",
            query_sigs.len(),
            truth.neighbors.len()
        )));
    }
    if db_sigs.len() != db_ids.len() {
        return Err(Error::Parameter("one id per database signature required".into()));
    }
    if r_grid.is_empty() || r_grid.contains(&0) {
        return Err(Error::Parameter("R grid must be non-empty and positive".into()));
    }
    let max_r = *r_grid.iter().max().unwrap();
    let per_query = query_sigs
        .par_iter()
        .zip(&truth.neighbors)
        .map(|(q, gold)| -> Result<(Vec<usize>, Vec<usize>)> {
            let counts = db_sigs
                .iter()
                .map(|d| collision_count(q, d))
                .collect::<Result<Vec<_>>>()?;
            let ranking = top_by_score(counts.into_iter().map(|c| c as f64), db_ids, max_r);
            let mut is_gold = vec![false; db_sigs.len()];
            for &g in gold {
                is_gold[g] = true;
            }
            let tps = r_grid
                .iter()
                .map(|&r| ranking.iter().take(r).filter(|&&p| is_gold[p]).count())
                .collect();
            Ok((ranking, tps))
        })
        .collect::<Result<Vec<_>>>()?;

    let nq = per_query.len().max(1) as f64;
    let mut precision = vec![0.0; r_grid.len()];
    let mut recall = vec![0.0; r_grid.len()];
    for ((_, tps), gold) in per_query.iter().zip(&truth.neighbors) {
        for (i, (&tp, &r)) in tps.iter().zip(r_grid).enumerate() {
            precision[i] += tp as f64 / r as f64;
            recall[i] += if gold.is_empty() { 0.0 } else { tp as f64 / gold.len() as f64 };
        }
    }
    precision.iter_mut().for_each(|x| *x /= nq);
    recall.iter_mut().for_each(|x| *x /= nq);
    Ok(RetrievalResult {
        r_grid: r_grid.to_vec(),
        precision,
        recall,
        rankings: per_query.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Mean and standard error over runs.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{Scheme, SignatureMeta, Slot};

    fn bv(ix: &[u32]) -> SparseBinaryVector {
        SparseBinaryVector::new(8, ix.to_vec()).unwrap()
    }

    #[test]
    fn ground_truth_examples() {
        let db = vec![bv(&[5, 6]), bv(&[2, 3, 4]), bv(&[1, 2, 3]), bv(&[7])];
        let ids = vec![0, 1, 2, 3];
        let gt = ground_truth(&[bv(&[1, 2, 3])], &db, &ids, 2).unwrap();
        assert_eq!(gt.neighbors[0], vec![2, 1]);
        let gt = ground_truth(&[bv(&[8])], &db, &ids, 3).unwrap();
        assert_eq!(gt.neighbors[0], vec![0, 1, 2]);
        let gt = ground_truth(&[bv(&[8])], &db, &ids, 50).unwrap();
        assert_eq!(gt.neighbors[0].len(), 4);
    }

    #[test]
    fn tiebreak_uses_ids_not_positions() {
        let db = vec![bv(&[1]), bv(&[1])];
        let gt = ground_truth(&[bv(&[1])], &db, &[9, 4], 1).unwrap();
        assert_eq!(gt.neighbors[0], vec![1]);
    }

    fn sig(codes: &[u32]) -> Signature {
        let meta = SignatureMeta {
            scheme: Scheme::OphRe,
            dim: 8,
            bins: codes.len() as u32,
            bits: Some(2),
            seed: 0,
        };
        Signature::new(meta, codes.iter().map(|&c| Slot::Code(c)).collect()).unwrap()
    }

    #[test]
    fn retrieval_metrics() {
        let db = vec![sig(&[0, 0, 0]), sig(&[1, 1, 1]), sig(&[1, 1, 0])];
        let truth = GroundTruth {
            top: 2,
            neighbors: vec![vec![1, 2]],
        };
        let res = retrieve(&[sig(&[1, 1, 1])], &db, &[0, 1, 2], &truth, &[1, 2, 3]).unwrap();
        assert_eq!(res.rankings[0], vec![1, 2, 0]);
        assert_eq!(res.precision, vec![1.0, 1.0, 2.0 / 3.0]);
        assert_eq!(res.recall, vec![0.5, 1.0, 1.0]);
        for (i, &r) in res.r_grid.iter().enumerate() {
            assert!((res.precision[i] * r as f64 - res.recall[i] * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stderr_of_constant_runs_is_zero() {
        assert_eq!(mean_and_stderr(&[0.5, 0.5, 0.5]), (0.5, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
