//! Confidence scoring for neural classifiers with linear classifier probes.
//!
//! A layered base classifier is instrumented with one linear probe per layer.
//! Meta-models (logistic regression or gradient-boosted trees) read the probe
//! outputs and predict whether the base model's prediction is correct; their
//! probability of "correct" is the confidence score used to filter predictions.
//!
//! Module map:
//!
//! - [`numeric`]: matrices, softmax/sigmoid, ranking, seeded RNG
//! - [`data`]: loading, splitting, label noise, out-of-domain pooling
//! - [`base_model`]: the observed feed-forward classifier
//! - [`probes`]: per-layer linear probes over frozen activations
//! - [`meta`]: feature assembly and the confidence models
//! - [`eval`]: ROC/PR, threshold sweeps, rejection and quadrant analysis
//! - [`pipeline`]: config-driven experiment runs and persisted artifacts

pub mod artifact;
pub mod base_model;
pub mod data;
pub mod error;
pub mod eval;
pub mod meta;
pub mod numeric;
pub mod pipeline;
pub mod probes;

pub use error::{Error, Result};
