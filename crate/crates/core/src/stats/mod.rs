//! Numerical statistics kernel shared by every estimator.
//!
//! Everything here is generic over [`Scalar`](crate::Scalar) and pure: inputs are
//! borrowed, outputs are freshly allocated.

mod corr;
mod fixed_effects;
pub(crate) mod linalg;
mod ols;
mod smooth;
mod ttest;

use thiserror::Error;

pub use corr::pearson_corr;
pub use fixed_effects::{absorb_fixed_effects, Absorbed, WithinFit};
pub use ols::{wls_fit, wls_fit_with, Collinear, CovType, FitOptions, FitResult};
pub use smooth::{epanechnikov, kernel_local_poly, silverman_bandwidth};
pub use ttest::{
    ci95_from, one_sample_ttest, paired_ttest, t_critical, two_sided_p, welch_ttest, TestResult,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("collinear design columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("weights must be finite and nonnegative")]
    InvalidWeights,
    #[error("too few observations: need {needed}, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("too few pairs: found {found}")]
    TooFewPairs { found: usize },
    #[error("zero variance in both samples")]
    ZeroVariance,
    #[error("paired differences are constant and nonzero")]
    ZeroVarianceDifferences,
    #[error("every fixed-effect group has a single row")]
    SingletonOnlyGroups,
    #[error("constant input")]
    ConstantInput,
    #[error("grid point {index} ({point}): {found} distinct points within bandwidth, need {needed}")]
    EmptyNeighborhood {
        index: usize,
        point: f64,
        found: usize,
        needed: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
