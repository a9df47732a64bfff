//! Binary restricted Boltzmann machines trained with the contrastive divergence
//! family (exact gradient, CD-k, PCD and their weighted variants WCD-k and
//! WPCD), plus exact evaluation on enumerable visible spaces, the synthetic
//! benchmark training spaces, and a Parzen-window sample-quality estimator.
//!
//! The numerical core is generic over a [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the CLI
//! and the benchmark protocol use.

pub mod bits;
pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod exact;
pub mod gradients;
pub mod math;
pub mod model;
pub mod parzen;
pub mod scalar;
pub mod trainer;

pub use bits::BitState;
pub use datasets::{Dataset, SplitSpec, TestSet};
pub use error::{Error, Result};
pub use exact::DEFAULT_ENUMERATION_LIMIT;
pub use gradients::EstimatorKind;
pub use scalar::Scalar;

/// Double-precision RBM parameters.
pub type Rbm = model::RbmParams<f64>;
/// Single-precision RBM parameters.
pub type Rbm32 = model::RbmParams<f32>;
pub type GibbsChain = model::GibbsChain;
pub type Gradient = gradients::GradientDelta<f64>;
pub type ExactDistribution = exact::ExactModelDistribution<f64>;
pub type SampleSet = parzen::SampleSet<f64>;
pub type TrainConfig = trainer::TrainConfig;
pub type RunRecord = trainer::RunRecord<f64>;

