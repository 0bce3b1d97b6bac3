//! Differentially private one permutation hashing, DP MinHash and DP bin-wise
//! consistent weighted sampling, with the privacy calculus, estimators and a
//! retrieval benchmark.

pub mod bench;
pub mod data;
pub mod error;
pub mod estimate;
pub mod hasher;
pub mod privacy;
pub mod randomness;
pub mod sketch;

pub use data::{SparseBinaryVector, SparseWeightedVector};
pub use error::{Error, Result};
pub use estimate::{collision_estimate, debias, EstimatorConfig};
pub use hasher::Hasher;
pub use privacy::{discount_factor, PrivacyBudget, Privatizer, Variant};
pub use sketch::{Scheme, Signature, SignatureMeta, Slot};
