//! Window selection by covariate balance.
//!
//! Treated and control sides are compared day by day: for each day the
//! group-size-weighted covariate share of each side forms one pair, and a
//! paired t-test runs over days. The window grows one duration per side while
//! every covariate stays balanced.

use ltu_core::dates::DateRange;
use ltu_core::stats::{absorb_fixed_effects, paired_ttest, FitOptions, StatsError};
use ltu_core::TestResult64;
use ltu_panel::{CellPanel, Covariate, DurationRange, THRESHOLD_DAYS};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::CoefficientRow;
use crate::RddError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    pub threshold: u32,
    pub covariates: Vec<Covariate>,
    /// A window is balanced when every covariate has p at or above this level.
    pub alpha: f64,
    /// Divide `alpha` by the number of covariates.
    pub bonferroni: bool,
    /// Treated durations added beyond the symmetric count.
    pub treated_extra: u32,
    /// Days used for the tests; the whole panel when absent.
    pub period: Option<DateRange>,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            threshold: THRESHOLD_DAYS,
            covariates: Covariate::balance_default(),
            alpha: 0.15,
            bonferroni: false,
            treated_extra: 0,
            period: None,
        }
    }
}

impl BalanceConfig {
    pub fn effective_alpha(&self) -> f64 {
        if self.bonferroni && !self.covariates.is_empty() {
            self.alpha / self.covariates.len() as f64
        } else {
            self.alpha
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub covariate: Covariate,
    /// Absent when the daily differences were constant and nonzero.
    pub test: Option<TestResult64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub window: DurationRange,
    pub n_days: usize,
    pub per_covariate: Vec<CovariateBalance>,
    pub min_p: f64,
    /// Level `min_p` was compared with.
    pub alpha: f64,
    pub balanced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Imbalance,
    MaxHalfWidth,
    PanelEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub window: DurationRange,
    pub half_width: u32,
    pub stopped_by: StopReason,
    /// Every window tested, smallest first; the last one failed unless the
    /// search hit a limit.
    pub trail: Vec<BalanceReport>,
}

/// `[threshold - h, threshold + h - 1 + treated_extra]`.
pub fn window_for(threshold: u32, half_width: u32, treated_extra: u32) -> Option<DurationRange> {
    if half_width == 0 || half_width >= threshold {
        return None;
    }
    DurationRange::new(threshold - half_width, threshold + half_width - 1 + treated_extra)
}

fn period_offsets(panel: &CellPanel, period: Option<DateRange>) -> Result<std::ops::Range<usize>, RddError> {
    let span = match period {
        Some(p) => panel
            .days()
            .intersect(&p)
            .ok_or_else(|| RddError::EmptyPeriod(p.to_string()))?,
        None => panel.days(),
    };
    let first = panel.day_offset(span.start).expect("inside panel");
    Ok(first..first + span.len())
}

pub(crate) fn check_window(panel: &CellPanel, window: DurationRange, threshold: u32) -> Result<(), RddError> {
    if !(window.lo < threshold && threshold <= window.hi) || !panel.durations().covers(&window) {
        return Err(RddError::InvalidWindow(window));
    }
    Ok(())
}

/// Day-paired balance tests of every configured covariate in `window`.
pub fn balance_test(panel: &CellPanel, window: DurationRange, cfg: &BalanceConfig) -> Result<BalanceReport, RddError> {
    if !panel.has_covariates() {
        return Err(RddError::MissingCovariates);
    }
    if cfg.covariates.is_empty() {
        return Err(RddError::InvalidArgument("empty covariate list".into()));
    }
    check_window(panel, window, cfg.threshold)?;
    let days = period_offsets(panel, cfg.period)?;

    // per paired day: side totals and per-covariate counts
    let k = cfg.covariates.len();
    let mut treated: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut control: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut any_treated = false;
    let mut any_control = false;
    for d in days {
        let mut t = (0u64, vec![0u64; k]);
        let mut c = (0u64, vec![0u64; k]);
        for i in window.iter() {
            let n = panel.group_size(i, d) as u64;
            if n == 0 {
                continue;
            }
            let side = if i >= cfg.threshold { &mut t } else { &mut c };
            side.0 += n;
            for (slot, &cov) in side.1.iter_mut().zip(&cfg.covariates) {
                *slot += panel.covariate_count(i, d, cov).expect("covariates tracked") as u64;
            }
        }
        any_treated |= t.0 > 0;
        any_control |= c.0 > 0;
        if t.0 > 0 && c.0 > 0 {
            treated.push(t);
            control.push(c);
        }
    }
    if !any_treated || !any_control {
        return Err(RddError::EmptySide { window });
    }
    if treated.len() < 2 {
        return Err(RddError::NoPairedDays {
            window,
            found: treated.len(),
        });
    }

    let per_covariate = cfg
        .covariates
        .par_iter()
        .enumerate()
        .map(|(m, &covariate)| {
            let pairs: Vec<(f64, f64)> = treated
                .iter()
                .zip(&control)
                .map(|(t, c)| (t.1[m] as f64 / t.0 as f64, c.1[m] as f64 / c.0 as f64))
                .collect();
            match paired_ttest(&pairs) {
                Ok(test) => Ok(CovariateBalance {
                    covariate,
                    p_value: test.p_value,
                    test: Some(test),
                }),
                // a constant nonzero gap is the most systematic imbalance there is
                Err(StatsError::ZeroVarianceDifferences) => Ok(CovariateBalance {
                    covariate,
                    test: None,
                    p_value: 0.0,
                }),
                Err(e) => Err(RddError::from(e)),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let min_p = per_covariate.iter().map(|c| c.p_value).fold(f64::INFINITY, f64::min);
    let alpha = cfg.effective_alpha();
    Ok(BalanceReport {
        window,
        n_days: treated.len(),
        per_covariate,
        min_p,
        alpha,
        balanced: min_p >= alpha,
    })
}

/// Expands the window from half-width 1 and keeps the last balanced one.
///
/// The search stops at the first unbalanced window, at `max_half_width`, or
/// when the next window would leave the panel's duration range.
pub fn select_bandwidth(
    panel: &CellPanel,
    cfg: &BalanceConfig,
    max_half_width: u32,
) -> Result<BandwidthSelection, RddError> {
    if max_half_width == 0 {
        return Err(RddError::InvalidArgument("max_half_width must be at least 1".into()));
    }
    let mut trail = Vec::new();
    let mut chosen: Option<(DurationRange, u32)> = None;
    let mut stopped_by = StopReason::MaxHalfWidth;
    for h in 1..=max_half_width {
        let window = match window_for(cfg.threshold, h, cfg.treated_extra) {
            Some(w) if panel.durations().covers(&w) => w,
            _ if chosen.is_some() => {
                stopped_by = StopReason::PanelEdge;
                break;
            }
            Some(w) => return Err(RddError::InvalidWindow(w)),
            None => return Err(RddError::InvalidWindow(w_or_point(cfg.threshold, cfg.treated_extra))),
        };
        let report = balance_test(panel, window, cfg)?;
        let ok = report.balanced;
        let min_p = report.min_p;
        trail.push(report);
        if !ok {
            if chosen.is_none() {
                return Err(RddError::NoBalancedWindow { min_p, trail });
            }
            stopped_by = StopReason::Imbalance;
            break;
        }
        chosen = Some((window, h));
    }
    let (window, half_width) = chosen.expect("at least one balanced window");
    Ok(BandwidthSelection {
        window,
        half_width,
        stopped_by,
        trail,
    })
}

fn w_or_point(threshold: u32, extra: u32) -> DurationRange {
    DurationRange {
        lo: threshold.saturating_sub(1),
        hi: threshold + extra,
    }
}

/// Slopes of the outcome on the duration inside each side of a window, with
/// day effects absorbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSlopes {
    pub control: CoefficientRow,
    pub treated: CoefficientRow,
}

pub fn forcing_slopes(
    panel: &CellPanel,
    window: DurationRange,
    threshold: u32,
    period: Option<DateRange>,
) -> Result<ForcingSlopes, RddError> {
    check_window(panel, window, threshold)?;
    let days = period_offsets(panel, period)?;
    let side = |lo: u32, hi: u32, name: &str| -> Result<CoefficientRow, RddError> {
        let mut groups = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for d in days.clone() {
            for i in lo..=hi {
                if let Some(s) = panel.share(i, d) {
                    groups.push(d);
                    x.push(i as f64);
                    y.push(s);
                }
            }
        }
        if y.is_empty() {
            return Err(RddError::EmptyPanel);
        }
        let design = Array2::from_shape_vec((x.len(), 1), x).expect("column vector");
        let fit = absorb_fixed_effects(&groups, design.view(), Array1::from(y).view(), None)?
            .fit(&FitOptions::default())?;
        Ok(CoefficientRow {
            name: name.into(),
            estimate: fit.fit.coefficients[0],
            se: fit.fit.std_error(0),
            p_value: fit.fit.p_value(0),
        })
    };
    Ok(ForcingSlopes {
        control: side(window.lo, threshold - 1, "control")?,
        treated: side(threshold, window.hi, "treated")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_around_the_threshold() {
        assert_eq!(window_for(729, 1, 0), DurationRange::new(728, 729));
        assert_eq!(window_for(729, 15, 0), DurationRange::new(714, 743));
        assert_eq!(window_for(729, 15, 1), DurationRange::new(714, 744));
        assert_eq!(window_for(729, 0, 0), None);
    }

    #[test]
    fn bonferroni_divides_alpha() {
        let cfg = BalanceConfig {
            bonferroni: true,
            ..Default::default()
        };
        assert!((cfg.effective_alpha() - 0.15 / 21.0).abs() < 1e-15);
    }
}
