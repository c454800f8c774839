//! Displacement and postponed-hiring diagnostics on control durations.
//!
//! If eligible workers crowd out near-eligible ones, or firms wait for
//! candidates to cross the threshold, hires just below the threshold are
//! depressed while the policy runs and recover once it ends. The change in
//! outcome across the end of the policy is therefore compared between a near
//! window and far windows of control durations.

use chrono::{Datelike, NaiveDate};
use ltu_core::dates::{ymd, DateRange};
use ltu_core::stats::{kernel_local_poly, silverman_bandwidth, welch_ttest};
use ltu_core::TestResult64;
use ltu_panel::{CellPanel, DurationRange, THRESHOLD_DAYS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::RddError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffByDuration {
    pub duration: u32,
    pub mean_before: f64,
    pub mean_after: f64,
    pub diff: f64,
    /// Person-days behind each mean.
    pub n_before: u64,
    pub n_after: u64,
}

fn day_span(panel: &CellPanel, period: &DateRange) -> Result<std::ops::Range<usize>, RddError> {
    let span = panel
        .days()
        .intersect(period)
        .ok_or_else(|| RddError::EmptyPeriod(period.to_string()))?;
    let first = panel.day_offset(span.start).expect("inside panel");
    Ok(first..first + span.len())
}

/// Group-size-weighted outcome of every control duration in each period and
/// the after-minus-before change. Durations empty in either period are left
/// out.
pub fn outcome_diff_by_duration(
    panel: &CellPanel,
    threshold: u32,
    before: DateRange,
    after: DateRange,
) -> Result<Vec<DiffByDuration>, RddError> {
    let b = day_span(panel, &before)?;
    let a = day_span(panel, &after)?;
    let lo = panel.durations().lo;
    let hi = panel.durations().hi.min(threshold.saturating_sub(1));
    if hi < lo {
        return Err(RddError::InvalidArgument(format!("no control durations below {threshold}")));
    }
    let pooled = |i: u32, days: &std::ops::Range<usize>| {
        let (mut h, mut n) = (0u64, 0u64);
        for d in days.clone() {
            h += panel.hires(i, d) as u64;
            n += panel.group_size(i, d) as u64;
        }
        (h, n)
    };
    Ok((lo..=hi)
        .filter_map(|i| {
            let (hb, nb) = pooled(i, &b);
            let (ha, na) = pooled(i, &a);
            if nb == 0 || na == 0 {
                return None;
            }
            let mean_before = hb as f64 / nb as f64;
            let mean_after = ha as f64 / na as f64;
            Some(DiffByDuration {
                duration: i,
                mean_before,
                mean_after,
                diff: mean_after - mean_before,
                n_before: nb,
                n_after: na,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleUnit {
    /// One observation per matched day: the window's pooled outcome.
    #[default]
    Daily,
    /// One observation per duration and matched day.
    DurationDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    pub near: DurationRange,
    pub far: Vec<DurationRange>,
    /// Years compared with `after_year`.
    pub years: Vec<i32>,
    pub after_year: i32,
    pub unit: SampleUnit,
    pub threshold: u32,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            near: DurationRange { lo: 714, hi: 728 },
            far: vec![DurationRange { lo: 365, hi: 380 }, DurationRange { lo: 545, hi: 560 }],
            years: vec![2011, 2012, 2013, 2014],
            after_year: 2015,
            unit: SampleUnit::Daily,
            threshold: THRESHOLD_DAYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearFarRow {
    pub year: i32,
    pub near: DurationRange,
    pub far: DurationRange,
    /// Near-sample change minus far-sample change.
    pub test: TestResult64,
    pub n_near: usize,
    pub n_far: usize,
    /// CI excludes zero and the near window gained more after the policy.
    pub detected: bool,
    /// CI excludes zero, either sign.
    pub detected_two_sided: bool,
    /// p-value of `H1: near change > far change`.
    pub one_sided_p: f64,
}

/// Day pairs `(before, after)` with the same calendar date; 29 February has
/// no partner and is skipped.
fn matched_days(panel: &CellPanel, year: i32, after_year: i32) -> Vec<(usize, usize)> {
    DateRange::years(year, year)
        .iter()
        .filter_map(|d| {
            let a = NaiveDate::from_ymd_opt(after_year, d.month(), d.day())?;
            Some((panel.day_offset(d)?, panel.day_offset(a)?))
        })
        .collect()
}

fn changes(panel: &CellPanel, window: DurationRange, pairs: &[(usize, usize)], unit: SampleUnit) -> Vec<f64> {
    let pooled = |d: usize| {
        let (mut h, mut n) = (0u64, 0u64);
        for i in window.iter() {
            h += panel.hires(i, d) as u64;
            n += panel.group_size(i, d) as u64;
        }
        (n > 0).then(|| h as f64 / n as f64)
    };
    match unit {
        SampleUnit::Daily => pairs
            .iter()
            .filter_map(|&(b, a)| Some(pooled(a)? - pooled(b)?))
            .collect(),
        SampleUnit::DurationDay => pairs
            .iter()
            .flat_map(|&(b, a)| window.iter().filter_map(move |i| Some(panel.share(i, a)? - panel.share(i, b)?)))
            .collect(),
    }
}

/// Welch tests of the near-window change against each far window, per year.
pub fn near_far_welch(panel: &CellPanel, cfg: &WelchConfig) -> Result<Vec<NearFarRow>, RddError> {
    for w in std::iter::once(&cfg.near).chain(&cfg.far) {
        if w.hi >= cfg.threshold || !panel.durations().covers(w) {
            return Err(RddError::InvalidBand {
                band: *w,
                threshold: cfg.threshold,
                panel: panel.durations(),
            });
        }
    }
    let jobs: Vec<(i32, DurationRange)> = cfg
        .years
        .iter()
        .flat_map(|&y| cfg.far.iter().map(move |&f| (y, f)))
        .collect();
    jobs.par_iter()
        .map(|&(year, far)| {
            let pairs = matched_days(panel, year, cfg.after_year);
            if pairs.is_empty() {
                return Err(RddError::EmptyPeriod(format!("{year} matched with {}", cfg.after_year)));
            }
            let a = changes(panel, cfg.near, &pairs, cfg.unit);
            let b = changes(panel, far, &pairs, cfg.unit);
            let test = welch_ttest(&a, &b)?;
            let excludes_zero = test.ci95.0 > 0.0 || test.ci95.1 < 0.0;
            let one_sided_p = if test.statistic > 0.0 {
                test.p_value / 2.0
            } else {
                1.0 - test.p_value / 2.0
            };
            Ok(NearFarRow {
                year,
                near: cfg.near,
                far,
                n_near: a.len(),
                n_far: b.len(),
                detected: excludes_zero && test.mean_diff > 0.0,
                detected_two_sided: excludes_zero,
                one_sided_p,
                test,
            })
        })
        .collect()
}

/// The before/after periods used by default: the policy years and the year
/// after.
pub fn default_periods() -> (DateRange, DateRange) {
    (
        DateRange {
            start: ymd(2011, 1, 1),
            end: ymd(2014, 12, 31),
        },
        DateRange::years(2015, 2015),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedPoint {
    pub duration: f64,
    pub raw: Option<f64>,
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCurve {
    pub bandwidth: f64,
    pub degree: usize,
    pub threshold: u32,
    pub points: Vec<SmoothedPoint>,
}

/// Local-linear smooth of the change against duration, on every observed
/// duration. The bandwidth defaults to Silverman's rule on the durations.
pub fn smoothed_diff_curve(
    diffs: &[DiffByDuration],
    threshold: u32,
    bandwidth: Option<f64>,
) -> Result<SmoothedCurve, RddError> {
    const MIN_DURATIONS: usize = 30;
    if diffs.len() < MIN_DURATIONS {
        return Err(RddError::InvalidArgument(format!(
            "{} durations, need at least {MIN_DURATIONS}",
            diffs.len()
        )));
    }
    let x: Vec<f64> = diffs.iter().map(|d| d.duration as f64).collect();
    let y: Vec<f64> = diffs.iter().map(|d| d.diff).collect();
    let bandwidth = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(&x)?,
    };
    let smoothed = kernel_local_poly(&x, &y, 1, bandwidth, &x)?;
    Ok(SmoothedCurve {
        bandwidth,
        degree: 1,
        threshold,
        points: x
            .iter()
            .zip(&y)
            .zip(smoothed)
            .map(|((&duration, &raw), smoothed)| SmoothedPoint {
                duration,
                raw: Some(raw),
                smoothed,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_panel::CellFilters;

    /// Durations 1..=3 over 2014-12-30..2015-01-02.
    fn hand_panel() -> CellPanel {
        let days = DateRange::new(ymd(2014, 12, 30), ymd(2015, 1, 2)).unwrap();
        let durations = DurationRange::new(1, 3).unwrap();
        #[rustfmt::skip]
        let gs = vec![
            10, 20, 5,
            10, 20, 5,
            10, 20, 0,
            10, 20, 5,
        ];
        #[rustfmt::skip]
        let hires = vec![
            1, 2, 0,
            3, 2, 1,
            2, 4, 0,
            2, 6, 5,
        ];
        CellPanel::from_counts(days, durations, gs, hires, None, CellFilters::default()).unwrap()
    }

    #[test]
    fn hand_enumerated_differences() {
        let p = hand_panel();
        let before = DateRange::years(2014, 2014);
        let after = DateRange::years(2015, 2015);
        let diffs = outcome_diff_by_duration(&p, 3, before, after).unwrap();
        assert_eq!(diffs.len(), 2);
        assert_eq!(diffs[0].duration, 1);
        assert!((diffs[0].mean_before - 4.0 / 20.0).abs() < 1e-15);
        assert!((diffs[0].mean_after - 4.0 / 20.0).abs() < 1e-15);
        assert!((diffs[1].mean_before - 4.0 / 40.0).abs() < 1e-15);
        assert!((diffs[1].mean_after - 10.0 / 40.0).abs() < 1e-15);
        for d in &diffs {
            assert!((d.diff - (d.mean_after - d.mean_before)).abs() < 1e-12);
        }
        assert!(matches!(
            outcome_diff_by_duration(&p, 3, DateRange::years(2013, 2013), after),
            Err(RddError::EmptyPeriod(_))
        ));
    }

    #[test]
    fn matched_days_skip_leap_day() {
        let days = DateRange::new(ymd(2012, 1, 1), ymd(2015, 12, 31)).unwrap();
        let durations = DurationRange::new(1, 1).unwrap();
        let n = days.len();
        let p = CellPanel::from_counts(days, durations, vec![1; n], vec![0; n], None, CellFilters::default()).unwrap();
        assert_eq!(matched_days(&p, 2012, 2015).len(), 365);
        assert_eq!(matched_days(&p, 2014, 2015).len(), 365);
    }

    #[test]
    fn constant_diff_gives_flat_curve() {
        let diffs: Vec<DiffByDuration> = (1..=40)
            .map(|i| DiffByDuration {
                duration: i,
                mean_before: 0.1,
                mean_after: 0.3,
                diff: 0.2,
                n_before: 1,
                n_after: 1,
            })
            .collect();
        let c = smoothed_diff_curve(&diffs, 729, None).unwrap();
        assert!(c.points.iter().all(|p| (p.smoothed - 0.2).abs() < 1e-12));
        assert!(smoothed_diff_curve(&diffs[..10], 729, None).is_err());
    }
}
