//! Robust probabilistic time-series forecasting.
//!
//! Sample-based autoregressive forecasters ([`forecaster`]), input and future
//! randomized smoothing ([`smoothing`]), the reparametrized mean-shift attack
//! ([`attack`]), Wasserstein robustness certificates ([`certificate`]) and the
//! experiment pipelines that tie them together ([`harness`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the order-only
//! metrics accept any [`Exact`] type, including rationals. The aliases below
//! fix the common `f64` instantiations.

pub mod attack;
pub mod certificate;
pub mod error;
pub mod forecaster;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod rng;
mod scalar;
pub mod series;
pub mod smoothing;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};

pub type TimeSeries = series::TimeSeries<f64>;
pub type ForecastSamples = series::ForecastSamples<f64>;
pub type EmpiricalMarginal = series::EmpiricalMarginal<f64>;
pub type PerturbationSpec = series::PerturbationSpec<f64>;
pub type ARGaussianModel = forecaster::ARGaussianModel<f64>;
pub type NeuralARModel = forecaster::NeuralARModel<f64>;
pub type Model = forecaster::Model<f64>;

pub type TimeSeries32 = series::TimeSeries<f32>;
pub type ForecastSamples32 = series::ForecastSamples<f32>;
pub type ARGaussianModel32 = forecaster::ARGaussianModel<f32>;
pub type NeuralARModel32 = forecaster::NeuralARModel<f32>;
