//! Retrieval benchmark: ground truth, precision/recall, experiment runs and
//! signature files.

mod experiment;
mod retrieval;
mod sigfile;

pub use experiment::{
    prepare, retrieval_csv, retrieval_sweep, run_experiment, run_experiment_config, run_seed,
    DataConfig, ExperimentConfig, Prepared, RetrievalRow, SyntheticConfig, RETRIEVAL_HEADER,
};
pub use retrieval::{
    ground_truth, ground_truth_weighted, mean_and_stderr, retrieve, GroundTruth, RetrievalResult,
};
pub use sigfile::{PrivacyRecord, SignatureFile, SignatureHeader};
