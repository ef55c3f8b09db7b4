//! Differential pairwise privacy (DPP) for distance metric learning.
//!
//! Pairwise training data `(Δx, y)` is modelled as an undirected graph whose
//! edges are the pairs. Because labels and feature differences can be
//! inferred along paths and cycles of that graph, hiding one pair requires
//! randomness that covers `κ` edges at once. This crate provides:
//!
//! * [`pairgraph`]: the graph model and its structural queries,
//! * [`kappa`]: exact and bounded computation of the privacy distance `κ`,
//! * [`mechanisms`]: Laplace, Gaussian, staircase, Duchi and Warner randomizers,
//! * [`dml`]: contrastive-loss metric learning with per-batch noisy gradients
//!   and data-dependent sensitivity reduction,
//! * [`eval`]: kNN utility evaluation and accuracy-vs-ε experiments,
//! * [`dataio`]: synthetic data, CSV ingestion, normalization and pair sampling.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod dml;
pub mod error;
pub mod eval;
pub mod kappa;
pub mod mechanisms;
pub mod pairgraph;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Pair datum over `f64` features.
pub type Pair = pairgraph::PairwiseDatum<f64>;
/// Pair datum over `f32` features.
pub type Pair32 = pairgraph::PairwiseDatum<f32>;
/// Pair graph over `f64` features.
pub type Graph = pairgraph::PairGraph<f64>;
/// Pair graph over `f32` features.
pub type Graph32 = pairgraph::PairGraph<f32>;
/// Metric model with an `f64` transformation matrix.
pub type Model = dml::MetricModel<f64>;
/// Metric model with an `f32` transformation matrix.
pub type Model32 = dml::MetricModel<f32>;
/// Sample matrix over `f64`.
pub type Samples = dataio::SampleSet<f64>;
/// Sample matrix over `f32`.
pub type Samples32 = dataio::SampleSet<f32>;
/// Training trace with `f64` values.
pub type Trace = dml::TrainTrace;
