//! Tax-credit amounts for a hire under the two incentive schemes and yearly
//! comparisons of their averages.
//!
//! The targeted scheme refunds a share of social security plus work insurance
//! contributions, the share depending on the firm class. The untargeted scheme
//! refunds social security only.

mod compare;
mod io;
mod rates;

pub use compare::{compare_averages, compare_yearly, AverageRow, ComparisonRow, HireRecord};
pub use io::{read_input, write_comparison_csv, SubsidyInput};
pub use rates::{credit_190, credit_407, FirmClass, FractionMode, SubsidyRates};

#[derive(Debug, thiserror::Error)]
pub enum SubsidyError {
    #[error("wage must be positive, got {0}")]
    NonPositiveWage(f64),
    #[error("unknown firm class `{0}`")]
    UnknownFirmClass(String),
    #[error("no hires recorded for year {0}")]
    EmptyYear(i32),
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("average for the untargeted scheme is zero in year {0}")]
    ZeroAverage(i32),
    #[error("unrecognised input header: {0}")]
    UnknownFormat(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
