//! From contract records to the (duration × day) cell panel.
//!
//! A worker enters a non-employment spell the day after an employment episode
//! ends and is counted in cell `(i, j)` with `i = j - last_end`, up to and
//! including the day `j` on which the next contract starts; that day the
//! worker also counts as a hire.

mod cells;
mod daily;
mod io;
mod parse;
pub mod records;
mod spells;

use thiserror::Error;

pub use cells::{aggregate_cells, AggregateSpec, CellFilters, CellPanel, DurationRange, RegionFilter, UnitCell};
pub use daily::{daily_collapse, DailySeries};
pub use io::{read_cells_csv, read_daily_csv, write_cells_csv, write_daily_csv, PanelManifest};
pub use parse::{emit_contracts, parse_contracts, FormatDescriptor, ParseDiagnostic, REQUIRED_COLUMNS};
pub use records::{
    AgeClass, Area, ContractRecord, ContractType, Covariate, CovariateFamily, CovariateProfile, Education,
    Region, Sector, Sex, UnknownToken, N_COVARIATES,
};
pub use spells::{build_spells, Spell, SpellOptions, SpellSet};

/// Eligibility threshold on the duration axis: 24 months of non-employment.
pub const THRESHOLD_DAYS: u32 = 729;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("input is empty")]
    EmptyFile,
    #[error("header lacks required column {0:?}")]
    MissingColumn(String),
    #[error("records of worker {worker:?} are not sorted by start date")]
    UnsortedInput { worker: String },
    #[error("empty range: {0}")]
    EmptyRange(String),
    #[error("no observations in the duration window {lo}..={hi}")]
    EmptyWindow { lo: u32, hi: u32 },
    #[error("malformed cell file at line {line}: {reason}")]
    MalformedCells { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
