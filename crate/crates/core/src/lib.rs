//! Fractional iterated Ornstein-Uhlenbeck processes.
//!
//! Exact covariance and spectral evaluation, seeded simulation, filter-based
//! estimation of the Hurst exponent and scale, discretized Whittle estimation
//! of the mean-reversion rates, and one-step forecasting.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod forecast;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod special_fn;
pub mod study;

pub use error::{FouError, Result};
pub use model::{CovarianceGrid, FouModel, Root, SpectralGridConfig, SpectralRule};
pub use simulate::SamplePath;
pub use special_fn::HurstParam;
