//! Estimators built on the cell panel.
//!
//! * [`bandwidth`]: local-randomisation window chosen by day-paired covariate
//!   balance tests, expanded one duration per side until the first failure.
//! * [`duration`]: the duration-threshold RDD, `y_ij = α + βD_ij + θ_j + ε_ij`
//!   with absorbed daily effects, and its robustness battery.
//! * [`time`]: the time-threshold RDD on the daily collapsed series with
//!   monthly dummies and a quadratic trend on each side of the policy date.
//! * [`indirect`]: displacement and postponed-hiring diagnostics.

pub mod bandwidth;
pub mod duration;
pub mod indirect;
pub mod report;
pub mod time;

use ltu_core::stats::StatsError;
use ltu_panel::{DurationRange, PanelError};
use thiserror::Error;

pub use bandwidth::{balance_test, forcing_slopes, select_bandwidth, window_for, BalanceConfig, BalanceReport, BandwidthSelection, StopReason};
pub use duration::{estimate_itt, placebo_battery, relative_effect, yearly_effect_correlation, BatteryConfig, DurationSpec, RddEstimate, SpecTag, Weighting};
pub use indirect::{near_far_welch, outcome_diff_by_duration, smoothed_diff_curve, DiffByDuration, NearFarRow, SampleUnit, SmoothedCurve, WelchConfig};
pub use report::{stars, BatteryRun};
pub use time::{estimate_time_itt, robustness_battery_time, AuxiliarySeries, Frequency, NamedSeries, TimeBatteryConfig, TimeRddEstimate, TimeSpec, VariantTag};

#[derive(Debug, Error)]
pub enum RddError {
    #[error("no estimable cells in the requested window and period")]
    EmptyPanel,
    #[error("treatment indicator is constant within every day")]
    DegenerateDesign,
    #[error("window {0} must satisfy lo < threshold <= hi inside the panel")]
    InvalidWindow(DurationRange),
    #[error("band {band} must lie below the threshold {threshold} and inside the panel durations {panel}")]
    InvalidBand { band: DurationRange, threshold: u32, panel: DurationRange },
    #[error("window {window}: {found} days with both sides populated, need 2")]
    NoPairedDays { window: DurationRange, found: usize },
    #[error("window {window}: one side holds no workers on any day")]
    EmptySide { window: DurationRange },
    #[error("even the smallest window is unbalanced (min p = {min_p})")]
    NoBalancedWindow { min_p: f64, trail: Vec<BalanceReport> },
    #[error("the panel carries no covariate counts")]
    MissingCovariates,
    #[error("control cells have zero mean outcome")]
    ZeroControlMean,
    #[error("series spans {before} days before and {after} days from the threshold, need {needed} each")]
    InsufficientSpan { before: usize, after: usize, needed: usize },
    #[error("period {0} holds no observations")]
    EmptyPeriod(String),
    #[error("need at least {needed} years, found {found}")]
    TooFewYears { needed: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Panel(#[from] PanelError),
}
