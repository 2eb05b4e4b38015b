//! Robust bias-aware (RBA) classification under covariate shift.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the linear and
//! kernelized robust estimators, the logistic-regression and
//! importance-weighting baselines, a discriminative density-ratio estimator
//! and cross-validation / importance-weighted cross-validation for choosing
//! the regularization weight.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod dataset;
pub mod density_ratio;
pub mod error;
pub mod kernel_rba;
pub mod kernels;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod model_select;
pub mod optim;
pub mod potential;
pub mod predict;
pub mod rba;

#[cfg(test)]
pub(crate) mod testutil;

pub use dataset::{Dataset, FeatureMap};
pub use density_ratio::{ClipBounds, DensityRatioModel};
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use linalg::Matrix;
pub use metrics::{MetricReport, PredictionMatrix};
pub use optim::{FitInfo, TrainConfig};
pub use predict::{Predictor, Trained};
