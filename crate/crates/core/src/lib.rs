//! Budget-constrained test-set curation and model ranking.
//!
//! A target collection of clips (embedding vector plus before/after MOS
//! triples per model) is partitioned with kmeans++/Lloyd, the cluster count
//! is chosen by Davies–Bouldin index, and a small subset is drawn per cluster
//! with probability-proportional-to-size sampling. The [`metrics`] module
//! scores a subset by χ² cluster coverage, Spearman fidelity of the model
//! ranking it induces, out-of-distribution share and mean DMOS.
//!
//! [`simulator`] builds synthetic collections with planted ground truth and
//! runs strategy comparisons over budgets.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod simulator;

pub use error::{Error, Result};
