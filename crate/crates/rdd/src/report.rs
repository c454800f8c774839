//! Formatting shared by the estimator reports.

use serde::{Deserialize, Serialize};

/// Significance stars: `***` p < 0.01, `**` p < 0.05, `*` p < 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// One named coefficient of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
}

/// One run of a robustness battery: an estimate or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRun<E, T> {
    pub label: String,
    pub tag: T,
    pub estimate: Option<E>,
    pub error: Option<String>,
}

impl<E, T> BatteryRun<E, T> {
    pub fn from_result<Err: std::fmt::Display>(label: String, tag: T, r: Result<E, Err>) -> Self {
        let (estimate, error) = match r {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            label,
            tag,
            estimate,
            error,
        }
    }
}

/// `3.01e-05***` style cell.
pub fn format_coefficient(estimate: f64, p: f64) -> String {
    format!("{estimate:.2e}{}", stars(p))
}
