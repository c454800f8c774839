pub mod estimate;
pub mod ingest;
pub mod report;
pub mod simulate;
pub mod subsidy;

use ltu_rdd::report::format_coefficient;
use ltu_rdd::{stars, BatteryRun, RddEstimate, TimeRddEstimate};
use serde::{Deserialize, Serialize};

/// One row of an estimate table, shared by both discontinuity designs so the
/// report can gather them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub label: String,
    pub tag: String,
    pub cell: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub n_obs: Option<usize>,
    pub relative_effect: Option<f64>,
    pub error: Option<String>,
}

/// snake_case name of a serialisable unit enum.
pub fn tag_name<T: Serialize>(tag: &T) -> String {
    match serde_json::to_value(tag) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

impl EstimateRow {
    fn fitted(label: String, tag: String, est: f64, se: f64, p: f64, ci: (f64, f64), n: usize) -> Self {
        Self {
            label,
            tag,
            cell: format_coefficient(est, p),
            estimate: Some(est),
            se: Some(se),
            p_value: Some(p),
            stars: stars(p).to_string(),
            ci_lo: Some(ci.0),
            ci_hi: Some(ci.1),
            n_obs: Some(n),
            relative_effect: None,
            error: None,
        }
    }

    fn failed(label: String, tag: String, error: String) -> Self {
        Self {
            label,
            tag,
            cell: String::new(),
            estimate: None,
            se: None,
            p_value: None,
            stars: String::new(),
            ci_lo: None,
            ci_hi: None,
            n_obs: None,
            relative_effect: None,
            error: Some(error),
        }
    }

    pub fn duration(label: &str, e: &RddEstimate) -> Self {
        Self {
            relative_effect: e.relative_effect,
            ..Self::fitted(label.into(), tag_name(&e.spec_tag), e.beta, e.se, e.p_value, e.ci95, e.n_obs)
        }
    }

    pub fn time(label: &str, e: &TimeRddEstimate) -> Self {
        Self::fitted(
            label.into(),
            tag_name(&e.variant_tag),
            e.jump,
            e.jump_se,
            e.jump_p,
            e.jump_ci95,
            e.n_obs,
        )
    }

    pub fn from_duration_run<T: Serialize>(run: &BatteryRun<RddEstimate, T>) -> Self {
        match (&run.estimate, &run.error) {
            (Some(e), _) => Self::duration(&run.label, e),
            (None, err) => Self::failed(run.label.clone(), tag_name(&run.tag), err.clone().unwrap_or_default()),
        }
    }

    pub fn from_time_run<T: Serialize>(run: &BatteryRun<TimeRddEstimate, T>) -> Self {
        match (&run.estimate, &run.error) {
            (Some(e), _) => Self::time(&run.label, e),
            (None, err) => Self::failed(run.label.clone(), tag_name(&run.tag), err.clone().unwrap_or_default()),
        }
    }
}
