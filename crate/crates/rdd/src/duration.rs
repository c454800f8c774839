//! Duration-threshold RDD on cell shares with absorbed daily effects.

use chrono::{Datelike, NaiveDate};
use ltu_core::dates::{ymd, DateRange};
use ltu_core::stats::{absorb_fixed_effects, ci95_from, pearson_corr, CovType, FitOptions};
use ltu_panel::{CellPanel, Covariate, DurationRange, THRESHOLD_DAYS};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::check_window;
use crate::report::{stars, BatteryRun};
use crate::RddError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecTag {
    Standard,
    WithCovariates,
    AltBandwidth,
    PlaceboThreshold,
    PlaceboYear,
    Mezzogiorno,
    GroupSizeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    None,
    GroupSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DurationSpec {
    pub window: DurationRange,
    pub threshold: u32,
    pub period: DateRange,
    /// Covariate shares added as regressors.
    pub covariates: Vec<Covariate>,
    pub weighting: Weighting,
    pub cov_type: CovType,
    pub tag: SpecTag,
}

impl Default for DurationSpec {
    fn default() -> Self {
        Self {
            window: DurationRange { lo: 714, hi: 744 },
            threshold: THRESHOLD_DAYS,
            period: DateRange {
                start: ymd(2011, 1, 1),
                end: ymd(2014, 12, 31),
            },
            covariates: Vec::new(),
            weighting: Weighting::None,
            cov_type: CovType::HC1,
            tag: SpecTag::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddEstimate {
    pub spec_tag: SpecTag,
    pub beta: f64,
    pub se: f64,
    pub p_value: f64,
    pub ci95: (f64, f64),
    pub stars: String,
    /// Estimable cells (group size above zero).
    pub n_obs: usize,
    pub n_days: usize,
    pub n_empty_cells: usize,
    /// Days populated on one side only; their effect is absorbed.
    pub n_one_sided_days: usize,
    pub dof: usize,
    pub r_squared_within: f64,
    pub r_squared_full: f64,
    pub constant: f64,
    pub window: DurationRange,
    pub threshold: u32,
    pub period: DateRange,
    pub weighting: Weighting,
    pub covariates: Vec<Covariate>,
    /// Covariates dropped as collinear with the day effects or each other.
    pub dropped_covariates: Vec<Covariate>,
    /// Group-size-weighted mean outcome of the control cells.
    pub control_mean: f64,
    pub relative_effect: Option<f64>,
}

/// One estimable cell in long form.
#[derive(Debug, Clone, PartialEq)]
pub struct RddRow {
    pub day: NaiveDate,
    pub duration: u32,
    pub group_size: u32,
    pub hires: u32,
    /// Values of the spec's covariates, in spec order.
    pub covariates: Vec<f64>,
}

/// Long-form rows of the estimable cells in `spec.window × spec.period`.
pub fn collect_rows(panel: &CellPanel, spec: &DurationSpec) -> Result<(Vec<RddRow>, usize), RddError> {
    check_window(panel, spec.window, spec.threshold)?;
    if !spec.covariates.is_empty() && !panel.has_covariates() {
        return Err(RddError::MissingCovariates);
    }
    let span = panel
        .days()
        .intersect(&spec.period)
        .ok_or_else(|| RddError::EmptyPeriod(spec.period.to_string()))?;
    let first = panel.day_offset(span.start).expect("inside panel");
    let mut rows = Vec::new();
    let mut empty = 0;
    for d in first..first + span.len() {
        for i in spec.window.iter() {
            let n = panel.group_size(i, d);
            if n == 0 {
                empty += 1;
                continue;
            }
            rows.push(RddRow {
                day: panel.days().day(d),
                duration: i,
                group_size: n,
                hires: panel.hires(i, d),
                covariates: spec
                    .covariates
                    .iter()
                    .map(|&c| panel.covariate_share(i, d, c).expect("nonempty cell"))
                    .collect(),
            });
        }
    }
    Ok((rows, empty))
}

/// Fits the model on the estimable cells of `spec.window × spec.period`.
pub fn estimate_itt(panel: &CellPanel, spec: &DurationSpec) -> Result<RddEstimate, RddError> {
    let (rows, empty) = collect_rows(panel, spec)?;
    let mut est = estimate_from_rows(rows, spec)?;
    est.n_empty_cells = empty;
    Ok(est)
}

/// Fits the model on rows in any order; they are sorted by (day, duration)
/// first so the result does not depend on the input order.
pub fn estimate_from_rows(mut rows: Vec<RddRow>, spec: &DurationSpec) -> Result<RddEstimate, RddError> {
    rows.retain(|r| r.group_size > 0 && spec.period.contains(r.day) && spec.window.contains(r.duration));
    if rows.is_empty() {
        return Err(RddError::EmptyPanel);
    }
    rows.sort_by_key(|r| (r.day, r.duration));
    let k = 1 + spec.covariates.len();
    if rows.iter().any(|r| r.covariates.len() != spec.covariates.len()) {
        return Err(RddError::InvalidArgument("row covariates do not match the spec".into()));
    }

    let n = rows.len();
    let mut design = Array2::<f64>::zeros((n, k));
    let mut y = Array1::<f64>::zeros(n);
    let mut w = Array1::<f64>::zeros(n);
    let mut days = Vec::with_capacity(n);
    let (mut ctl_h, mut ctl_n) = (0u64, 0u64);
    for (r, row) in rows.iter().enumerate() {
        let treated = row.duration >= spec.threshold;
        design[[r, 0]] = if treated { 1.0 } else { 0.0 };
        for (c, &v) in row.covariates.iter().enumerate() {
            design[[r, 1 + c]] = v;
        }
        y[r] = row.hires as f64 / row.group_size as f64;
        w[r] = row.group_size as f64;
        days.push(row.day);
        if !treated {
            ctl_h += row.hires as u64;
            ctl_n += row.group_size as u64;
        }
    }

    // days with one side only
    let mut n_days = 0;
    let mut one_sided = 0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        let (mut t, mut c) = (false, false);
        while end < n && rows[end].day == rows[start].day {
            if rows[end].duration >= spec.threshold {
                t = true;
            } else {
                c = true;
            }
            end += 1;
        }
        n_days += 1;
        if !(t && c) {
            one_sided += 1;
        }
        start = end;
    }

    let weights = match spec.weighting {
        Weighting::None => None,
        Weighting::GroupSize => Some(w.view()),
    };
    let absorbed = absorb_fixed_effects(&days, design.view(), y.view(), weights)?;
    let fit = absorbed.fit(&FitOptions {
        cov: spec.cov_type,
        ..Default::default()
    })?;
    if fit.fit.dropped.contains(&0) {
        return Err(RddError::DegenerateDesign);
    }
    let beta = fit.fit.coefficients[0];
    let se = fit.fit.std_error(0);
    let p_value = fit.fit.p_value(0);
    let control_mean = if ctl_n > 0 { ctl_h as f64 / ctl_n as f64 } else { f64::NAN };
    Ok(RddEstimate {
        spec_tag: spec.tag,
        beta,
        se,
        p_value,
        ci95: ci95_from(beta, se, fit.fit.dof as f64),
        stars: stars(p_value).to_string(),
        n_obs: fit.fit.n_obs,
        n_days,
        n_empty_cells: 0,
        n_one_sided_days: one_sided,
        dof: fit.fit.dof,
        r_squared_within: fit.fit.r_squared,
        r_squared_full: fit.full_r_squared,
        constant: fit.constant,
        window: spec.window,
        threshold: spec.threshold,
        period: spec.period,
        weighting: spec.weighting,
        covariates: spec.covariates.clone(),
        dropped_covariates: fit.fit.dropped.iter().map(|&c| spec.covariates[c - 1]).collect(),
        control_mean,
        relative_effect: relative_effect(beta, control_mean).ok(),
    })
}

/// `beta` over the weighted control mean.
pub fn relative_effect(beta: f64, control_mean: f64) -> Result<f64, RddError> {
    if !(control_mean > 0.0) {
        return Err(RddError::ZeroControlMean);
    }
    Ok(beta / control_mean)
}

/// Robustness runs around a base specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    /// Fake thresholds; the window keeps its offsets around the threshold.
    pub placebo_thresholds: Vec<u32>,
    /// Period in which the threshold is tested after the policy ended.
    pub placebo_period: Option<DateRange>,
    pub alt_windows: Vec<DurationRange>,
    pub covariates: Vec<Covariate>,
    pub weighted_run: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            placebo_thresholds: vec![669, 790],
            placebo_period: Some(DateRange {
                start: ymd(2015, 1, 1),
                end: ymd(2015, 12, 31),
            }),
            alt_windows: vec![DurationRange { lo: 720, hi: 740 }, DurationRange { lo: 724, hi: 734 }],
            covariates: Covariate::regression_default(),
            weighted_run: true,
        }
    }
}

/// Runs the base specification and every variant of `cfg`; a failing run is
/// recorded and the rest continue. `mezzogiorno` is the same panel built with
/// the southern-region filter.
pub fn placebo_battery(
    panel: &CellPanel,
    base: &DurationSpec,
    cfg: &BatteryConfig,
    mezzogiorno: Option<&CellPanel>,
) -> Vec<BatteryRun<RddEstimate, SpecTag>> {
    let mut runs: Vec<(String, DurationSpec, bool)> = Vec::new();
    let variant = |tag| DurationSpec {
        tag,
        ..base.clone()
    };
    runs.push(("standard".into(), variant(SpecTag::Standard), false));
    if !cfg.covariates.is_empty() {
        let mut s = variant(SpecTag::WithCovariates);
        s.covariates = cfg.covariates.clone();
        runs.push(("with_covariates".into(), s, false));
    }
    for &w in &cfg.alt_windows {
        let mut s = variant(SpecTag::AltBandwidth);
        s.window = w;
        runs.push((format!("bandwidth_{}_{}", w.lo, w.hi), s, false));
    }
    for &t in &cfg.placebo_thresholds {
        let below = base.threshold - base.window.lo;
        let above = base.window.hi - base.threshold;
        let mut s = variant(SpecTag::PlaceboThreshold);
        s.threshold = t;
        s.window = DurationRange {
            lo: t.saturating_sub(below),
            hi: t + above,
        };
        runs.push((format!("placebo_threshold_{t}"), s, false));
    }
    if let Some(p) = cfg.placebo_period {
        let mut s = variant(SpecTag::PlaceboYear);
        s.period = p;
        runs.push((format!("placebo_period_{}", p.start.year()), s, false));
    }
    if cfg.weighted_run {
        let mut s = variant(SpecTag::GroupSizeWeighted);
        s.weighting = Weighting::GroupSize;
        runs.push(("group_size_weighted".into(), s, false));
    }
    if mezzogiorno.is_some() {
        runs.push(("mezzogiorno".into(), variant(SpecTag::Mezzogiorno), true));
    }

    runs.into_par_iter()
        .map(|(label, spec, south)| {
            let p = if south { mezzogiorno.expect("checked") } else { panel };
            BatteryRun::from_result(label, spec.tag, estimate_itt(p, &spec))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyCorrelation {
    pub years: Vec<i32>,
    pub estimates: Vec<RddEstimate>,
    pub counts: Vec<f64>,
    pub correlation: f64,
}

/// Per-year effects correlated with externally supplied yearly counts.
pub fn yearly_effect_correlation(
    panel: &CellPanel,
    base: &DurationSpec,
    years: &[i32],
    counts: &[f64],
) -> Result<YearlyCorrelation, RddError> {
    if years.len() < 3 {
        return Err(RddError::TooFewYears {
            needed: 3,
            found: years.len(),
        });
    }
    if counts.len() != years.len() {
        return Err(RddError::InvalidArgument(format!(
            "{} counts for {} years",
            counts.len(),
            years.len()
        )));
    }
    let estimates = years
        .par_iter()
        .map(|&y| {
            let spec = DurationSpec {
                period: DateRange::years(y, y),
                ..base.clone()
            };
            estimate_itt(panel, &spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let betas: Vec<f64> = estimates.iter().map(|e| e.beta).collect();
    let correlation = pearson_corr(&betas, counts)?;
    Ok(YearlyCorrelation {
        years: years.to_vec(),
        estimates,
        counts: counts.to_vec(),
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_panel::CellFilters;

    /// Durations 727..=730 over four days; hires chosen per cell.
    fn small_panel(hires: impl Fn(u32, usize) -> u32) -> CellPanel {
        let days = DateRange::new(ymd(2012, 3, 1), ymd(2012, 3, 4)).unwrap();
        let durations = DurationRange::new(727, 730).unwrap();
        let mut gs = Vec::new();
        let mut h = Vec::new();
        for d in 0..4 {
            for i in durations.iter() {
                gs.push(100);
                h.push(hires(i, d));
            }
        }
        CellPanel::from_counts(days, durations, gs, h, None, CellFilters::default()).unwrap()
    }

    fn spec() -> DurationSpec {
        DurationSpec {
            window: DurationRange::new(727, 730).unwrap(),
            period: DateRange::years(2012, 2012),
            ..Default::default()
        }
    }

    #[test]
    fn equal_sides_give_zero_beta() {
        let p = small_panel(|i, d| (d as u32 + 1) * 2 + (i % 2));
        let est = estimate_itt(&p, &spec()).unwrap();
        assert!(est.beta.abs() < 1e-15);
        assert_eq!(est.n_obs, 16);
        assert_eq!(est.n_days, 4);
        assert_eq!(est.dof, 16 - 1 - 4);
    }

    #[test]
    fn constant_jump_is_recovered() {
        let p = small_panel(|i, d| 3 + d as u32 + if i >= 729 { 2 } else { 0 } + (i % 2));
        let est = estimate_itt(&p, &spec()).unwrap();
        assert!((est.beta - 0.02).abs() < 1e-14);
        // control mean: hires 3+d+(i%2) over days 0..4, durations 727, 728
        let ctl: u32 = (0..4).map(|d| (3 + d) * 2 + 1).sum();
        assert!((est.control_mean - ctl as f64 / 800.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_when_one_side_only() {
        let p = small_panel(|_, d| d as u32);
        let mut s = spec();
        s.window = DurationRange::new(727, 730).unwrap();
        s.threshold = 731;
        assert!(matches!(estimate_itt(&p, &s), Err(RddError::InvalidWindow(_))));
    }

    #[test]
    fn relative_effect_ratios() {
        assert!((relative_effect(3.01e-5, 8.36e-5).unwrap() - 0.36).abs() < 1e-3);
        assert_eq!(relative_effect(0.0, 1e-4).unwrap(), 0.0);
        assert_eq!(relative_effect(1e-4, 1e-4).unwrap(), 1.0);
        assert!(matches!(relative_effect(1.0, 0.0), Err(RddError::ZeroControlMean)));
    }

    #[test]
    fn battery_records_failures() {
        let p = small_panel(|i, d| 3 + d as u32 + (i % 2));
        let cfg = BatteryConfig {
            covariates: Vec::new(),
            ..Default::default()
        };
        let runs = placebo_battery(&p, &spec(), &cfg, None);
        let standard = runs.iter().find(|r| r.tag == SpecTag::Standard).unwrap();
        assert!(standard.estimate.is_some());
        // windows outside the panel fail without stopping the battery
        let placebo = runs.iter().find(|r| r.tag == SpecTag::PlaceboThreshold).unwrap();
        assert!(placebo.error.is_some());
        assert!(runs.iter().any(|r| r.tag == SpecTag::GroupSizeWeighted && r.estimate.is_some()));
    }
}
