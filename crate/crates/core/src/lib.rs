//! Learning-curve extrapolation by autoregressive rollouts.
//!
//! A one-step model (a windowed regression forest or a variational-dropout
//! recurrent network) is applied repeatedly to extend a partially observed
//! curve; many sampled trajectories are summarized per epoch as a Gaussian.
//! The crate also carries the static baselines, an evaluation harness and a
//! synthetic benchmark generator.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod rollout;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod vrnn;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::CurveDataset<f64>;
pub type Curve = data::LearningCurve<f64>;
pub type Config = data::HyperparameterConfig<f64>;
pub type Forest = forest::RegressionForest<f64>;
pub type Gaussian = forest::PredictiveGaussian<f64>;
pub type Vrnn = vrnn::VrnnModel<f64>;
pub type Rollout = rollout::RolloutResult<f64>;
pub type WindowedForest = rollout::WindowedForestPredictor<f64>;
pub type StaticForest = baselines::StaticForestModel<f64>;
