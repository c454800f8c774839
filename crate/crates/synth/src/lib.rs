//! Synthetic data with known ground truth.
//!
//! Spell lengths are driven by a daily hire hazard
//! `h(i, j) = baseline(i) * season(month(j)) + jump(j) + itt * 1{i >= threshold}`
//! while the targeted policy runs, with optional displacement and postponement
//! distortions around the threshold. Each spell draws one exponential target
//! and exits when its cumulative hazard crosses it; walking the same target
//! under the hazard without the policy gives the potential spell length.
//!
//! Three levels of simulation share that hazard: full worker histories emitted
//! as contract records, spells reaching a duration window, and cell panels
//! drawn directly.

pub mod config;
pub mod corpus;
pub mod hazard;
pub mod montecarlo;
pub mod panel_dgp;
pub mod rng;

pub use config::{CovariateMixture, CovariateTilt, DgpConfig, WorkerTraits};
pub use corpus::{
    hire_records, record_window, simulate_corpus, simulate_window_spells, simulate_workers, to_records, to_spells,
    SyntheticJob, SyntheticSpell, SyntheticWorker, WindowSampler,
};
pub use hazard::{BaselineHazard, HazardModel, HazardPiece, MixtureSpec};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Rdd(#[from] ltu_rdd::RddError),
    #[error(transparent)]
    Panel(#[from] ltu_panel::PanelError),
}
