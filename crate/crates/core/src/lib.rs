//! Selection and ranking of semi-supervised anomaly detectors.
//!
//! Training data is assumed to contain normal rows only. Each candidate
//! detector is described by two quantities that can be computed without any
//! anomalies: the fraction of the training data's enclosing ball it accepts
//! as normal (its *hypervolume*) and its false-positive rate under Monte
//! Carlo cross-validation. Candidates are ranked either with a fixed linear
//! combination of the two, or with a random-forest meta-model trained on
//! labeled corpora to predict the detector's scaled Matthews correlation.
//!
//! The crate is organised along the pipeline:
//!
//! * [`dataset`]: CSV loading, outlier sub-sampling, stratified splitting,
//!   robust scaling.
//! * [`detectors`]: the native detector portfolio and hyperparameter spaces.
//! * [`hypervolume`]: enclosing ball and Monte Carlo volume estimates.
//! * [`features`]: detector/landmark features and the meta-learning dataset.
//! * [`metamodel`]: imputation, scaling and the random-forest surrogate.
//! * [`ranking`]: rankings, metrics and the leave-one-out evaluation.
//! * [`cli`]: orchestration used by the `adsel` binary.

pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod detectors;
pub mod error;
pub mod features;
pub mod hypervolume;
pub mod metamodel;
pub mod ranking;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
