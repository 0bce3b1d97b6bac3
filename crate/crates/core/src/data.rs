//! Sparse vectors, datasets and libsvm ingestion.
//!
//! Coordinates are 1-based everywhere: a vector of dimension `D` stores
//! indices in `[1, D]`, which is also what the libsvm format uses.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

/// Support of a vector in `{0,1}^D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryVector {
    dim: u32,
    indices: Vec<u32>,
}

impl SparseBinaryVector {
    /// Builds a vector from strictly ascending 1-based indices.
    pub fn new(dim: u32, indices: Vec<u32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        check_indices(dim, indices.iter().copied())?;
        Ok(Self { dim, indices })
    }

    /// Sorts and deduplicates `indices` before validating the range.
    pub fn from_unsorted(dim: u32, mut indices: Vec<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(dim, indices)
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Number of nonzeros, `f` in the privacy calculus.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub(crate) fn with_dim(mut self, dim: u32) -> Self {
        self.dim = dim;
        self
    }
}

/// Nonnegative vector stored as ascending `(index, weight)` pairs with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeightedVector {
    dim: u32,
    entries: Vec<(u32, f64)>,
}

impl SparseWeightedVector {
    pub fn new(dim: u32, entries: Vec<(u32, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        check_indices(dim, entries.iter().map(|e| e.0))?;
        if let Some(&(i, w)) = entries.iter().find(|e| !(e.1 > 0.0 && e.1.is_finite())) {
            return Err(Error::Precondition(format!(
                "weight at index {i} must be positive and finite, got {w}"
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub(crate) fn with_dim(mut self, dim: u32) -> Self {
        self.dim = dim;
        self
    }
}

impl From<&SparseBinaryVector> for SparseWeightedVector {
    fn from(v: &SparseBinaryVector) -> Self {
        Self {
            dim: v.dim,
            entries: v.indices.iter().map(|&i| (i, 1.0)).collect(),
        }
    }
}

fn check_indices(dim: u32, indices: impl Iterator<Item = u32>) -> Result<()> {
    let mut prev = 0u32;
    for i in indices {
        if i <= prev {
            return Err(Error::Precondition(format!(
                "indices must be strictly ascending and >= 1 (saw {i} after {prev})"
            )));
        }
        if i > dim {
            return Err(Error::Dimension(format!("index {i} exceeds dimension {dim}")));
        }
        prev = i;
    }
    Ok(())
}

/// Exact binary Jaccard similarity by sorted-list intersection.
pub fn jaccard(u: &SparseBinaryVector, v: &SparseBinaryVector) -> f64 {
    let inter = intersection_size(u.indices(), v.indices());
    let union = u.nnz() + v.nnz() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub(crate) fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Weighted Jaccard: sum of coordinatewise minima over sum of maxima.
pub fn weighted_jaccard(u: &SparseWeightedVector, v: &SparseWeightedVector) -> f64 {
    let (a, b) = (u.entries(), v.entries());
    let (mut i, mut j) = (0, 0);
    let (mut lo, mut hi) = (0.0, 0.0);
    while i < a.len() || j < b.len() {
        let ia = a.get(i).map_or(u32::MAX, |e| e.0);
        let ib = b.get(j).map_or(u32::MAX, |e| e.0);
        if ia == ib {
            lo += a[i].1.min(b[j].1);
            hi += a[i].1.max(b[j].1);
            i += 1;
            j += 1;
        } else if ia < ib {
            hi += a[i].1;
            i += 1;
        } else {
            hi += b[j].1;
            j += 1;
        }
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Vectors sharing one dimension, with pass-through labels and stable ids.
///
/// Ids are the zero-based line numbers of the source file and survive filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<V> {
    dim: u32,
    vectors: Vec<V>,
    labels: Vec<Option<String>>,
    ids: Vec<usize>,
}

pub type WeightedDataset = Dataset<SparseWeightedVector>;
pub type BinaryDataset = Dataset<SparseBinaryVector>;

/// Access to the dimension of any sparse vector type.
pub trait HasDim {
    fn vector_dim(&self) -> u32;
    fn vector_nnz(&self) -> usize;
}

impl HasDim for SparseBinaryVector {
    fn vector_dim(&self) -> u32 {
        self.dim
    }
    fn vector_nnz(&self) -> usize {
        self.nnz()
    }
}

impl HasDim for SparseWeightedVector {
    fn vector_dim(&self) -> u32 {
        self.dim
    }
    fn vector_nnz(&self) -> usize {
        self.nnz()
    }
}

impl<V: HasDim + Clone> Dataset<V> {
    /// Ids default to `0..n`.
    pub fn new(dim: u32, vectors: Vec<V>, labels: Vec<Option<String>>) -> Result<Self> {
        let ids = (0..vectors.len()).collect();
        Self::with_ids(dim, vectors, labels, ids)
    }

    pub fn with_ids(
        dim: u32,
        vectors: Vec<V>,
        labels: Vec<Option<String>>,
        ids: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != vectors.len() || ids.len() != vectors.len() {
            return Err(Error::Parameter(
                "labels, ids and vectors must have equal length".into(),
            ));
        }
        if let Some(v) = vectors.iter().find(|v| v.vector_dim() != dim) {
            return Err(Error::Dimension(format!(
                "vector of dimension {} in a dataset of dimension {dim}",
                v.vector_dim()
            )));
        }
        Ok(Self {
            dim,
            vectors,
            labels,
            ids,
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[V] {
        &self.vectors
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Keeps the rows at `positions`, in the given order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            dim: self.dim,
            vectors: positions.iter().map(|&p| self.vectors[p].clone()).collect(),
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
        }
    }

    /// Reassigns ids to `0..n` in the current order.
    pub fn renumbered(mut self) -> Self {
        self.ids = (0..self.vectors.len()).collect();
        self
    }
}

impl WeightedDataset {
    /// Raises the dimension of every vector. Used for zero-padding `D` up to a multiple of `K`.
    pub fn pad_to(self, dim: u32) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Dimension(format!(
                "cannot shrink dimension {} to {dim}",
                self.dim
            )));
        }
        Ok(Self {
            dim,
            vectors: self.vectors.into_iter().map(|v| v.with_dim(dim)).collect(),
            labels: self.labels,
            ids: self.ids,
        })
    }
}

impl BinaryDataset {
    pub fn pad_to(self, dim: u32) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Dimension(format!(
                "cannot shrink dimension {} to {dim}",
                self.dim
            )));
        }
        Ok(Self {
            dim,
            vectors: self.vectors.into_iter().map(|v| v.with_dim(dim)).collect(),
            labels: self.labels,
            ids: self.ids,
        })
    }

    pub fn to_weighted(&self) -> WeightedDataset {
        Dataset {
            dim: self.dim,
            vectors: self.vectors.iter().map(SparseWeightedVector::from).collect(),
            labels: self.labels.clone(),
            ids: self.ids.clone(),
        }
    }
}

/// Outcome counts of [`filter_min_nnz`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterReport {
    pub retained: usize,
    pub dropped: usize,
}

impl FilterReport {
    pub fn retained_fraction(&self) -> f64 {
        let total = self.retained + self.dropped;
        if total == 0 {
            1.0
        } else {
            self.retained as f64 / total as f64
        }
    }
}

/// Sets every positive entry to 1.
pub fn binarize(d: &WeightedDataset) -> BinaryDataset {
    Dataset {
        dim: d.dim,
        vectors: d
            .vectors
            .iter()
            .map(|v| SparseBinaryVector {
                dim: v.dim,
                indices: v.entries.iter().map(|e| e.0).collect(),
            })
            .collect(),
        labels: d.labels.clone(),
        ids: d.ids.clone(),
    }
}

/// Keeps the vectors with at least `f_min` nonzeros.
pub fn filter_min_nnz<V: HasDim + Clone>(
    d: &Dataset<V>,
    f_min: u32,
) -> Result<(Dataset<V>, FilterReport)> {
    if f_min == 0 {
        return Err(Error::Parameter("f_min must be at least 1".into()));
    }
    let keep: Vec<usize> = (0..d.len())
        .filter(|&p| d.vectors[p].vector_nnz() >= f_min as usize)
        .collect();
    let report = FilterReport {
        retained: keep.len(),
        dropped: d.len() - keep.len(),
    };
    Ok((d.select(&keep), report))
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

/// Reads a libsvm file (`<label> <idx>:<val> ...`); `.gz` files are decompressed.
///
/// The dimension is the larger of the maximum observed index and `dim_override`.
/// Explicit zero values are dropped; negative values are rejected.
pub fn load_libsvm(path: impl AsRef<Path>, dim_override: Option<u32>) -> Result<WeightedDataset> {
    let path = path.as_ref();
    parse_libsvm(open_maybe_gz(path)?, dim_override).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses libsvm text from any reader. See [`load_libsvm`].
pub fn parse_libsvm(reader: impl BufRead, dim_override: Option<u32>) -> Result<WeightedDataset> {
    let mut rows: Vec<(Option<String>, Vec<(u32, f64)>)> = Vec::new();
    let mut max_index = 0u32;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().map(str::to_owned);
        let mut entries = Vec::new();
        let mut prev = 0u32;
        for tok in tokens {
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected <idx>:<val>, got `{tok}`")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| parse_err(format!("non-numeric index `{idx}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("non-numeric value `{val}`")))?;
            if idx < 1 {
                return Err(parse_err("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(parse_err(format!(
                    "index {idx} is not ascending after {prev}"
                )));
            }
            if !val.is_finite() || val < 0.0 {
                return Err(parse_err(format!("value {val} must be finite and >= 0")));
            }
            prev = idx;
            if val > 0.0 {
                entries.push((idx, val));
            }
        }
        max_index = max_index.max(prev);
        rows.push((label, entries));
    }

    let dim = match dim_override {
        Some(o) if o < max_index => {
            return Err(Error::Dimension(format!(
                "dimension override {o} is smaller than observed index {max_index}"
            )))
        }
        Some(o) => o,
        None => max_index,
    };
    let dim = dim.max(1);
    let (labels, vectors): (Vec<_>, Vec<_>) = rows
        .into_iter()
        .map(|(l, e)| (l, SparseWeightedVector { dim, entries: e }))
        .unzip();
    Dataset::new(dim, vectors, labels)
}

/// Writes libsvm text. Values use the shortest representation that parses back exactly.
pub fn write_libsvm(d: &WeightedDataset, mut out: impl Write) -> std::io::Result<()> {
    for (v, label) in d.vectors.iter().zip(&d.labels) {
        out.write_all(label.as_deref().unwrap_or("0").as_bytes())?;
        for (i, w) in &v.entries {
            write!(out, " {i}:{w}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_libsvm(d: &WeightedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_libsvm(d, &mut enc).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut w = BufWriter::new(file);
        write_libsvm(d, &mut w).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, dim: Option<u32>) -> Result<WeightedDataset> {
        parse_libsvm(text.as_bytes(), dim)
    }

    #[test]
    fn loads_single_line_with_override() {
        let d = parse("1 2:1 7:3\n", Some(8)).unwrap();
        assert_eq!(d.dim(), 8);
        assert_eq!(d.vectors()[0].entries(), &[(2, 1.0), (7, 3.0)]);
        assert_eq!(d.labels()[0].as_deref(), Some("1"));
    }

    #[test]
    fn duplicate_index_is_a_parse_error_with_line_number() {
        match parse("1 1:1\n0 3:1 3:2\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_tokens() {
        assert!(matches!(parse("0 x:1", None), Err(Error::Parse { .. })));
        assert!(matches!(parse("0 0:1", None), Err(Error::Parse { .. })));
        assert!(matches!(parse("0 3", None), Err(Error::Parse { .. })));
        assert!(matches!(parse("0 3:-1", None), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_input_uses_override() {
        let d = parse("", Some(16)).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.dim(), 16);
    }

    #[test]
    fn override_smaller_than_data_fails() {
        assert!(matches!(parse("0 9:1", Some(8)), Err(Error::Dimension(_))));
    }

    #[test]
    fn max_of_observed_and_override() {
        assert_eq!(parse("0 9:1", None).unwrap().dim(), 9);
        assert_eq!(parse("0 9:1", Some(12)).unwrap().dim(), 12);
    }

    #[test]
    fn binarize_examples() {
        let d = parse("0 2:0.5 7:3\n1 1:1 4:1\n2\n", Some(8)).unwrap();
        let b = binarize(&d);
        assert_eq!(b.vectors()[0].indices(), &[2, 7]);
        assert_eq!(b.vectors()[1].indices(), &[1, 4]);
        assert_eq!(b.vectors()[2].nnz(), 0);
        assert_eq!(binarize(&b.to_weighted()), b);
    }

    #[test]
    fn filter_keeps_only_large_vectors() {
        let line = |n: u32| {
            let toks: Vec<String> = (1..=n).map(|i| format!("{i}:1")).collect();
            format!("0 {}\n", toks.join(" "))
        };
        let text = format!("{}{}{}", line(3), line(50), line(49));
        let d = binarize(&parse(&text, Some(64)).unwrap());
        let (kept, report) = filter_min_nnz(&d, 50).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.ids(), &[1]);
        assert_eq!(report, FilterReport { retained: 1, dropped: 2 });
    }

    #[test]
    fn filter_at_one_drops_only_empty_vectors() {
        let d = binarize(&parse("0 1:1\n0\n0 2:1 3:1\n", None).unwrap());
        let (kept, report) = filter_min_nnz(&d, 1).unwrap();
        assert_eq!(kept.ids(), &[0, 2]);
        assert_eq!(report.dropped, 1);
        assert!(filter_min_nnz(&d, 0).is_err());
    }

    #[test]
    fn jaccard_arithmetic() {
        let u = SparseBinaryVector::new(4, vec![1, 2, 3]).unwrap();
        let v = SparseBinaryVector::new(4, vec![2, 3, 4]).unwrap();
        assert_eq!(jaccard(&u, &v), 0.5);
        let a = SparseWeightedVector::new(2, vec![(1, 1.0), (2, 1.0)]).unwrap();
        let b = SparseWeightedVector::new(2, vec![(1, 1.0), (2, 3.0)]).unwrap();
        assert_eq!(weighted_jaccard(&a, &b), 0.5);
    }

    #[test]
    fn vector_invariants_enforced() {
        assert!(SparseBinaryVector::new(4, vec![2, 2]).is_err());
        assert!(SparseBinaryVector::new(4, vec![5]).is_err());
        assert!(SparseBinaryVector::new(4, vec![0]).is_err());
        assert!(SparseWeightedVector::new(4, vec![(1, 0.0)]).is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = WeightedDataset> {
        let row = (
            0u8..4,
            proptest::collection::btree_map(1u32..60, 0.001f64..1e6, 0..12),
        );
        proptest::collection::vec(row, 0..20).prop_map(|rows| {
            let vectors = rows
                .iter()
                .map(|(_, m)| SparseWeightedVector::new(64, m.clone().into_iter().collect()).unwrap())
                .collect();
            let labels = rows.iter().map(|(l, _)| Some(l.to_string())).collect();
            Dataset::new(64, vectors, labels).unwrap()
        })
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(d in arb_dataset()) {
            let mut buf = Vec::new();
            write_libsvm(&d, &mut buf).unwrap();
            let back = parse_libsvm(buf.as_slice(), Some(64)).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn filter_partitions_input(d in arb_dataset(), f_min in 1u32..8) {
            let b = binarize(&d);
            let (kept, report) = filter_min_nnz(&b, f_min).unwrap();
            prop_assert_eq!(report.retained + report.dropped, b.len());
            prop_assert!(kept.vectors().iter().all(|v| v.nnz() >= f_min as usize));
            prop_assert_eq!(binarize(&kept.to_weighted()), kept);
        }
    }
}
