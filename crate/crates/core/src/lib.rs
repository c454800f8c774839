//! Shared numerical kernel and calendar helpers.
//!
//! [`stats`] holds weighted least squares with fixed-effect absorption, HC0/HC1
//! covariance, Welch/paired/one-sample t-tests, Pearson correlation and
//! kernel-weighted local polynomial smoothing, all generic over [`Scalar`].
//! The `*64` aliases below are the concrete types the estimators use.

pub mod dates;
pub mod scalar;
pub mod stats;

pub use scalar::Scalar;

pub type FitResult64 = stats::FitResult<f64>;
pub type TestResult64 = stats::TestResult<f64>;
pub type WithinFit64 = stats::WithinFit<f64>;
