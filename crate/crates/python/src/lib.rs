use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dpoph::estimate::EstimatorConfig;
use dpoph::privacy::{self, pmf_diff_count};
use dpoph::randomness::stream;
use dpoph::{Error, Privatizer, Signature, Slot, SparseBinaryVector, SparseWeightedVector, Variant};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerics(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn variant(name: &str) -> PyResult<Variant> {
    name.parse::<Variant>().map_err(py_err)
}

fn binary(dim: u32, indices: Vec<u32>) -> PyResult<SparseBinaryVector> {
    SparseBinaryVector::from_unsorted(dim, indices).map_err(py_err)
}

fn weighted(dim: u32, mut entries: Vec<(u32, f64)>) -> PyResult<SparseWeightedVector> {
    entries.sort_by_key(|&(i, _)| i);
    SparseWeightedVector::new(dim, entries).map_err(py_err)
}

/// A hash signature. Slots are codes, raw hash values, or `None` for EMPTY.
#[pyclass(name = "Signature", frozen)]
struct PySignature(Signature);

#[pymethods]
impl PySignature {
    #[getter]
    fn slots(&self) -> Vec<Option<u32>> {
        self.0
            .slots()
            .iter()
            .map(|s| match *s {
                Slot::Raw(v) | Slot::Code(v) => Some(v),
                Slot::Empty => None,
            })
            .collect()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.0.meta().scheme.to_string()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let m = self.0.meta();
        format!("Signature(scheme={}, D={}, K={}, b={:?})", m.scheme, m.dim, m.bins, m.bits)
    }
}

/// Privatization parameters bound to a hasher.
#[pyclass(name = "Privatizer", frozen)]
struct PyPrivatizer(Privatizer);

#[pymethods]
impl PyPrivatizer {
    #[getter]
    fn n(&self) -> u32 {
        self.0.discount().n
    }

    #[getter]
    fn eps_prime(&self) -> f64 {
        self.0.eps_prime()
    }

    #[getter]
    fn keep_probability(&self) -> f64 {
        self.0.keep_probability()
    }
}

/// Seeded hashing structure for one variant.
#[pyclass(name = "Hasher", frozen)]
struct PyHasher(dpoph::Hasher);

#[pymethods]
impl PyHasher {
    #[new]
    #[pyo3(signature = (variant_name, dim, bins, bits = 1, seed = 0))]
    fn new(variant_name: &str, dim: u32, bins: u32, bits: u8, seed: u64) -> PyResult<Self> {
        dpoph::Hasher::new(variant(variant_name)?, seed, dim, bins, bits)
            .map(Self)
            .map_err(py_err)
    }

    #[pyo3(signature = (epsilon, delta = 1e-6, f_min = 1))]
    fn privatizer(&self, epsilon: f64, delta: f64, f_min: u32) -> PyResult<PyPrivatizer> {
        let delta = if self.0.variant().is_pure() { 0.0 } else { delta };
        self.0.privatizer(epsilon, delta, f_min).map(PyPrivatizer).map_err(py_err)
    }

    /// Non-private signature of a binary vector given by 1-based indices.
    fn sketch(&self, indices: Vec<u32>) -> PyResult<PySignature> {
        let u = binary(self.0.dim(), indices)?;
        self.0.sketch(&u).map(PySignature).map_err(py_err)
    }

    /// Non-private signature of a weighted vector given as (index, weight) pairs.
    fn sketch_weighted(&self, entries: Vec<(u32, f64)>) -> PyResult<PySignature> {
        let u = weighted(self.0.dim(), entries)?;
        self.0.sketch_weighted(&u).map(PySignature).map_err(py_err)
    }

    fn dp_sketch(&self, indices: Vec<u32>, privatizer: &PyPrivatizer, noise_seed: u64) -> PyResult<PySignature> {
        let u = binary(self.0.dim(), indices)?;
        let mut rng = stream(noise_seed);
        self.0.dp_sketch(&u, &privatizer.0, &mut rng).map(PySignature).map_err(py_err)
    }

    fn dp_sketch_weighted(
        &self,
        entries: Vec<(u32, f64)>,
        privatizer: &PyPrivatizer,
        noise_seed: u64,
    ) -> PyResult<PySignature> {
        let u = weighted(self.0.dim(), entries)?;
        let mut rng = stream(noise_seed);
        self.0
            .dp_sketch_weighted(&u, &privatizer.0, &mut rng)
            .map(PySignature)
            .map_err(py_err)
    }
}

/// Discount factor N for a variant at sparsity `f_min`.
#[pyfunction]
#[pyo3(signature = (dim, bins, f_min, bits, delta, variant_name))]
fn discount_factor(dim: u32, bins: u32, f_min: u32, bits: u8, delta: f64, variant_name: &str) -> PyResult<u32> {
    privacy::discount_factor(dim, bins, f_min, bits, delta, variant(variant_name)?)
        .map(|d| d.n)
        .map_err(py_err)
}

/// Law of the number of differing codes between neighbors, as (x, probability) pairs.
#[pyfunction]
fn diff_count_pmf(dim: u32, bins: u32, nnz: u32, bits: u8, variant_name: &str) -> PyResult<Vec<(u32, f64)>> {
    pmf_diff_count(dim, bins, nnz, bits, variant(variant_name)?)
        .map(|p| p.iter().collect())
        .map_err(py_err)
}

/// Fraction of agreeing slots.
#[pyfunction]
fn collision_estimate(a: &PySignature, b: &PySignature) -> PyResult<f64> {
    dpoph::collision_estimate(&a.0, &b.0).map_err(py_err)
}

/// Unbiased Jaccard estimate from a collision rate.
#[pyfunction]
#[pyo3(signature = (j_hat, bits, p_keep = 1.0))]
fn debias(j_hat: f64, bits: u8, p_keep: f64) -> PyResult<f64> {
    let cfg = EstimatorConfig {
        bits,
        p_keep,
        debias: true,
    };
    dpoph::debias(j_hat, &cfg).map_err(py_err)
}

/// Exact Jaccard similarity of two index sets.
#[pyfunction]
fn jaccard(dim: u32, u: Vec<u32>, v: Vec<u32>) -> PyResult<f64> {
    Ok(dpoph::data::jaccard(&binary(dim, u)?, &binary(dim, v)?))
}

#[pymodule]
fn dpoph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHasher>()?;
    m.add_class::<PyPrivatizer>()?;
    m.add_class::<PySignature>()?;
    m.add_function(wrap_pyfunction!(discount_factor, m)?)?;
    m.add_function(wrap_pyfunction!(diff_count_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(collision_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(debias, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    Ok(())
}
