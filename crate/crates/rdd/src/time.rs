//! Time-threshold RDD on a daily series.
//!
//! `y_k = α + Σ θ_l m_lk + γ1 T + γ2 T² + γ3 P + γ4 TP + γ5 T²P + x_k'δ + ε_k`
//! with `P = 1{day ≥ threshold}`. `T` is the day index: days since the
//! threshold when centred, days since the series origin otherwise.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use ltu_core::dates::ymd;
use ltu_core::stats::{ci95_from, two_sided_p, wls_fit_with, CovType, FitOptions};
use ltu_panel::DailySeries;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{stars, BatteryRun, CoefficientRow};
use crate::RddError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
    Annual,
}

impl Frequency {
    /// Ordinal of the period containing `day`.
    pub fn period_of(self, day: NaiveDate) -> i64 {
        match self {
            Frequency::Daily => day.num_days_from_ce() as i64,
            Frequency::Monthly => day.year() as i64 * 12 + day.month0() as i64,
            Frequency::Quarterly => day.year() as i64 * 4 + (day.month0() / 3) as i64,
            Frequency::Annual => day.year() as i64,
        }
    }
}

/// An auxiliary regressor observed at some frequency and read on every day
/// of the period it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub frequency: Frequency,
    values: BTreeMap<i64, f64>,
}

impl NamedSeries {
    /// `points` are keyed by any day inside their period.
    pub fn new(name: impl Into<String>, frequency: Frequency, points: &[(NaiveDate, f64)]) -> Self {
        Self {
            name: name.into(),
            frequency,
            values: points.iter().map(|&(d, v)| (frequency.period_of(d), v)).collect(),
        }
    }

    /// The series shifted `periods` periods later, so each day reads the value
    /// of `periods` periods before.
    pub fn lagged(&self, periods: i64, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            frequency: self.frequency,
            values: self.values.iter().map(|(&k, &v)| (k + periods, v)).collect(),
        }
    }

    pub fn value_on(&self, day: NaiveDate) -> Option<f64> {
        self.values.get(&self.frequency.period_of(day)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    Standard,
    ExcludeDecember,
    AddGdp,
    AddConsumption,
    AddLaggedConsumption,
    AddUnemploymentShare,
    ExcludeJobsAct,
    AddComposition,
    PlaceboDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    pub threshold: NaiveDate,
    pub center_time: bool,
    /// Month (1..=12) absorbed by the intercept.
    pub baseline_month: u32,
    /// `(year, month)` pairs whose days are dropped.
    pub exclude_months: Vec<(i32, u32)>,
    /// Keep only days strictly before this date.
    pub keep_before: Option<NaiveDate>,
    /// Day with `T = 0` when uncentred; the first observation when absent.
    pub time_origin: Option<NaiveDate>,
    pub min_side_days: usize,
    pub cov_type: CovType,
    pub variant: VariantTag,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            threshold: ymd(2015, 1, 1),
            center_time: true,
            baseline_month: 1,
            exclude_months: Vec::new(),
            keep_before: None,
            time_origin: None,
            min_side_days: 90,
            cov_type: CovType::HC1,
            variant: VariantTag::Standard,
        }
    }
}

/// One day of the fitted series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedPoint {
    pub day: NaiveDate,
    pub y: f64,
    pub fitted: f64,
    /// Fitted value with every `P` term switched off.
    pub counterfactual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRddEstimate {
    pub variant_tag: VariantTag,
    pub threshold: NaiveDate,
    pub center_time: bool,
    /// `T` of the threshold day: 0 when centred.
    pub t0: f64,
    /// γ1..γ5.
    pub gamma: [f64; 5],
    pub gamma_se: [f64; 5],
    pub gamma_p: [f64; 5],
    pub gamma3_se: f64,
    pub gamma3_stars: String,
    /// `γ3 + γ4 T0 + γ5 T0²`: the discontinuity whatever the centring.
    pub jump: f64,
    pub jump_se: f64,
    pub jump_p: f64,
    pub jump_ci95: (f64, f64),
    pub intercept: f64,
    /// Month effects relative to the baseline month, January first.
    pub monthly_effects: [f64; 12],
    pub baseline_month: u32,
    pub covariates: Vec<CoefficientRow>,
    /// Names of regressors dropped as collinear.
    pub dropped: Vec<String>,
    pub n_obs: usize,
    /// Days removed by exclusions or missing covariates.
    pub n_excluded: usize,
    pub n_missing_covariates: usize,
    pub n_empty_days: usize,
    pub dof: usize,
    pub r_squared: f64,
    #[serde(skip)]
    pub fitted: Vec<FittedPoint>,
}

const GAMMA_NAMES: [&str; 5] = ["T", "T2", "P", "TP", "T2P"];

/// Fits the model on `series` with `covariates` read on every day; days where
/// a covariate is missing are dropped.
pub fn estimate_time_itt(
    series: &DailySeries,
    spec: &TimeSpec,
    covariates: &[NamedSeries],
) -> Result<TimeRddEstimate, RddError> {
    if !(1..=12).contains(&spec.baseline_month) {
        return Err(RddError::InvalidArgument(format!("baseline month {}", spec.baseline_month)));
    }
    let mut keep = Vec::new();
    let mut excluded = 0;
    let mut missing = 0;
    let mut cov_values: Vec<Vec<f64>> = Vec::new();
    for k in 0..series.len() {
        let day = series.days[k];
        let ym = (day.year(), day.month());
        if spec.exclude_months.contains(&ym) || spec.keep_before.is_some_and(|b| day >= b) {
            excluded += 1;
            continue;
        }
        let vals: Option<Vec<f64>> = covariates.iter().map(|c| c.value_on(day)).collect();
        match vals {
            Some(v) => {
                keep.push(k);
                cov_values.push(v);
            }
            None => missing += 1,
        }
    }
    let before = keep.iter().filter(|&&k| series.days[k] < spec.threshold).count();
    let after = keep.len() - before;
    if before < spec.min_side_days || after < spec.min_side_days {
        return Err(RddError::InsufficientSpan {
            before,
            after,
            needed: spec.min_side_days,
        });
    }

    let origin = if spec.center_time {
        spec.threshold
    } else {
        spec.time_origin.unwrap_or(series.days[keep[0]])
    };
    let t0 = (spec.threshold - origin).num_days() as f64;

    // intercept, 11 month dummies, 5 policy terms, covariates
    let months: Vec<u32> = (1..=12).filter(|&m| m != spec.baseline_month).collect();
    let n = keep.len();
    let k = 1 + months.len() + 5 + covariates.len();
    let g0 = 1 + months.len();
    let mut names = vec!["const".to_string()];
    names.extend(months.iter().map(|m| format!("month_{m}")));
    names.extend(GAMMA_NAMES.iter().map(|s| s.to_string()));
    names.extend(covariates.iter().map(|c| c.name.clone()));

    let mut x = Array2::<f64>::zeros((n, k));
    let mut y = Array1::<f64>::zeros(n);
    for (r, &src) in keep.iter().enumerate() {
        let day = series.days[src];
        let t = (day - origin).num_days() as f64;
        let p = if day >= spec.threshold { 1.0 } else { 0.0 };
        x[[r, 0]] = 1.0;
        if let Some(pos) = months.iter().position(|&m| m == day.month()) {
            x[[r, 1 + pos]] = 1.0;
        }
        x[[r, g0]] = t;
        x[[r, g0 + 1]] = t * t;
        x[[r, g0 + 2]] = p;
        x[[r, g0 + 3]] = t * p;
        x[[r, g0 + 4]] = t * t * p;
        for (c, &v) in cov_values[r].iter().enumerate() {
            x[[r, g0 + 5 + c]] = v;
        }
        y[r] = series.y[src];
    }

    let fit = wls_fit_with(
        x.view(),
        y.view(),
        None,
        &FitOptions {
            cov: spec.cov_type,
            ..Default::default()
        },
    )?;
    if fit.dropped.contains(&(g0 + 2)) {
        return Err(RddError::DegenerateDesign);
    }

    let mut gamma = [0.0; 5];
    let mut gamma_se = [0.0; 5];
    let mut gamma_p = [0.0; 5];
    for j in 0..5 {
        gamma[j] = fit.coefficients[g0 + j];
        gamma_se[j] = fit.std_error(g0 + j);
        gamma_p[j] = fit.p_value(g0 + j);
    }
    // a = (0, .., 1, T0, T0², 0, ..) on the P terms
    let a = [1.0, t0, t0 * t0];
    let jump: f64 = (0..3).map(|j| a[j] * gamma[2 + j]).sum();
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += a[i] * a[j] * fit.vcov[[g0 + 2 + i, g0 + 2 + j]];
        }
    }
    let jump_se = var.max(0.0).sqrt();
    let jump_p = two_sided_p(jump / jump_se, fit.dof as f64);

    let mut monthly_effects = [0.0; 12];
    for (pos, &m) in months.iter().enumerate() {
        monthly_effects[(m - 1) as usize] = fit.coefficients[1 + pos];
    }

    let fitted_all = x.dot(&fit.coefficients);
    let mut x_cf = x.clone();
    for c in g0 + 2..g0 + 5 {
        x_cf.column_mut(c).fill(0.0);
    }
    let cf_all = x_cf.dot(&fit.coefficients);
    let fitted = keep
        .iter()
        .enumerate()
        .map(|(r, &src)| FittedPoint {
            day: series.days[src],
            y: y[r],
            fitted: fitted_all[r],
            counterfactual: cf_all[r],
        })
        .collect();

    Ok(TimeRddEstimate {
        variant_tag: spec.variant,
        threshold: spec.threshold,
        center_time: spec.center_time,
        t0,
        gamma,
        gamma_se,
        gamma_p,
        gamma3_se: gamma_se[2],
        gamma3_stars: stars(gamma_p[2]).to_string(),
        jump,
        jump_se,
        jump_p,
        jump_ci95: ci95_from(jump, jump_se, fit.dof as f64),
        intercept: fit.coefficients[0],
        monthly_effects,
        baseline_month: spec.baseline_month,
        covariates: covariates
            .iter()
            .enumerate()
            .map(|(c, s)| CoefficientRow {
                name: s.name.clone(),
                estimate: fit.coefficients[g0 + 5 + c],
                se: fit.std_error(g0 + 5 + c),
                p_value: fit.p_value(g0 + 5 + c),
            })
            .collect(),
        dropped: fit.dropped.iter().map(|&c| names[c].clone()).collect(),
        n_obs: fit.n_obs,
        n_excluded: excluded,
        n_missing_covariates: missing,
        n_empty_days: series.empty_days.len(),
        dof: fit.dof,
        r_squared: fit.r_squared,
        fitted,
    })
}

/// Auxiliary series for the robustness battery; absent ones skip their run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySeries {
    /// Quarterly GDP; entered lagged four quarters.
    pub gdp: Option<NamedSeries>,
    /// Annual final consumption of non-residents; entered current and lagged
    /// one year.
    pub consumption: Option<NamedSeries>,
    /// Annual share of unemployed among the non-detected.
    pub unemployment_share: Option<NamedSeries>,
    /// Education and sector shares of the population.
    pub composition: Vec<NamedSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeBatteryConfig {
    /// Start of the months affected by the concurrent labour reform; days
    /// from here on are dropped.
    pub jobs_act_start: NaiveDate,
    pub december: (i32, u32),
    pub placebo_dates: Vec<NaiveDate>,
    /// Placebo fits use only days before this date.
    pub placebo_cutoff: NaiveDate,
}

impl Default for TimeBatteryConfig {
    fn default() -> Self {
        Self {
            jobs_act_start: ymd(2015, 3, 1),
            december: (2015, 12),
            placebo_dates: vec![
                ymd(2014, 1, 1),
                ymd(2013, 12, 31),
                ymd(2013, 1, 1),
                ymd(2012, 12, 31),
                ymd(2012, 1, 1),
            ],
            placebo_cutoff: ymd(2015, 1, 1),
        }
    }
}

/// Runs the standard fit, the December exclusion, every covariate addition,
/// the reform-month exclusion and the placebo dates. Variants other than the
/// December exclusion keep the base spec's exclusions.
pub fn robustness_battery_time(
    series: &DailySeries,
    base: &TimeSpec,
    aux: &AuxiliarySeries,
    cfg: &TimeBatteryConfig,
) -> Vec<BatteryRun<TimeRddEstimate, VariantTag>> {
    enum Plan {
        Fit(TimeSpec, Vec<NamedSeries>),
        Skip(&'static str),
    }
    let variant = |tag| TimeSpec {
        variant: tag,
        ..base.clone()
    };
    let with = |tag, covs: Option<Vec<NamedSeries>>, why| match covs {
        Some(c) => Plan::Fit(variant(tag), c),
        None => Plan::Skip(why),
    };
    let mut plans: Vec<(String, VariantTag, Plan)> = Vec::new();
    plans.push(("standard".into(), VariantTag::Standard, Plan::Fit(variant(VariantTag::Standard), vec![])));
    let mut dec = variant(VariantTag::ExcludeDecember);
    if !dec.exclude_months.contains(&cfg.december) {
        dec.exclude_months.push(cfg.december);
    }
    plans.push(("exclude_december".into(), VariantTag::ExcludeDecember, Plan::Fit(dec, vec![])));
    plans.push((
        "add_gdp".into(),
        VariantTag::AddGdp,
        with(
            VariantTag::AddGdp,
            aux.gdp.as_ref().map(|g| vec![g.lagged(4, "gdp_lag4q")]),
            "no GDP series supplied",
        ),
    ));
    plans.push((
        "add_consumption".into(),
        VariantTag::AddConsumption,
        with(
            VariantTag::AddConsumption,
            aux.consumption.as_ref().map(|c| vec![c.clone()]),
            "no consumption series supplied",
        ),
    ));
    plans.push((
        "add_lagged_consumption".into(),
        VariantTag::AddLaggedConsumption,
        with(
            VariantTag::AddLaggedConsumption,
            aux.consumption.as_ref().map(|c| vec![c.lagged(1, format!("{}_lag1", c.name))]),
            "no consumption series supplied",
        ),
    ));
    plans.push((
        "add_unemployment_share".into(),
        VariantTag::AddUnemploymentShare,
        with(
            VariantTag::AddUnemploymentShare,
            aux.unemployment_share.as_ref().map(|u| vec![u.clone()]),
            "no unemployment-share series supplied",
        ),
    ));
    let mut jobs = variant(VariantTag::ExcludeJobsAct);
    jobs.keep_before = Some(match base.keep_before {
        Some(b) => b.min(cfg.jobs_act_start),
        None => cfg.jobs_act_start,
    });
    plans.push(("exclude_jobs_act".into(), VariantTag::ExcludeJobsAct, Plan::Fit(jobs, vec![])));
    plans.push((
        "add_composition".into(),
        VariantTag::AddComposition,
        with(
            VariantTag::AddComposition,
            (!aux.composition.is_empty()).then(|| aux.composition.clone()),
            "no composition series supplied",
        ),
    ));
    for &d in &cfg.placebo_dates {
        let mut s = variant(VariantTag::PlaceboDate);
        s.threshold = d;
        s.keep_before = Some(cfg.placebo_cutoff);
        plans.push((format!("placebo_{d}"), VariantTag::PlaceboDate, Plan::Fit(s, vec![])));
    }

    plans
        .into_par_iter()
        .map(|(label, tag, plan)| match plan {
            Plan::Fit(spec, covs) => BatteryRun::from_result(label, tag, estimate_time_itt(series, &spec, &covs)),
            Plan::Skip(why) => BatteryRun {
                label,
                tag,
                estimate: None,
                error: Some(format!("skipped: {why}")),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_core::dates::DateRange;
    use ltu_panel::DurationRange;

    fn series(f: impl Fn(NaiveDate, i64) -> f64) -> DailySeries {
        let span = DateRange::new(ymd(2014, 1, 1), ymd(2015, 12, 31)).unwrap();
        let days: Vec<NaiveDate> = span.iter().collect();
        let y = days.iter().enumerate().map(|(k, &d)| f(d, k as i64)).collect();
        DailySeries {
            window: DurationRange::new(714, 744).unwrap(),
            group_size: vec![1; days.len()],
            hires: vec![0; days.len()],
            days,
            y,
            empty_days: Vec::new(),
        }
    }

    #[test]
    fn frequency_periods_and_lags() {
        let q = NamedSeries::new("gdp", Frequency::Quarterly, &[(ymd(2014, 2, 1), 1.0), (ymd(2015, 5, 1), 2.0)]);
        assert_eq!(q.value_on(ymd(2014, 3, 31)), Some(1.0));
        assert_eq!(q.value_on(ymd(2014, 4, 1)), None);
        let l = q.lagged(4, "gdp_lag");
        assert_eq!(l.value_on(ymd(2015, 1, 15)), Some(1.0));
        assert_eq!(l.value_on(ymd(2016, 6, 1)), Some(2.0));
    }

    #[test]
    fn level_jump_is_exact_without_noise() {
        let s = series(|d, k| {
            let season = 1e-3 * d.month() as f64;
            let jump = if d >= ymd(2015, 1, 1) { 0.01 } else { 0.0 };
            0.05 + season + 1e-5 * k as f64 + jump
        });
        let est = estimate_time_itt(&s, &TimeSpec::default(), &[]).unwrap();
        assert!((est.gamma[2] - 0.01).abs() < 1e-10);
        assert!((est.jump - est.gamma[2]).abs() < 1e-15);
        assert_eq!(est.n_obs, 730);
        assert!((est.monthly_effects[5] - 5e-3).abs() < 1e-10);
        assert_eq!(est.monthly_effects[0], 0.0);
        let cf = est.fitted.last().unwrap();
        assert!((cf.fitted - cf.counterfactual - 0.01).abs() < 1e-10);
    }

    #[test]
    fn exclusions_and_span() {
        let s = series(|d, _| (d.ordinal() % 7) as f64);
        let spec = TimeSpec {
            exclude_months: vec![(2015, 12), (2019, 1)],
            ..Default::default()
        };
        let est = estimate_time_itt(&s, &spec, &[]).unwrap();
        assert_eq!(est.n_obs, 730 - 31);
        assert_eq!(est.n_excluded, 31);
        let short = TimeSpec {
            keep_before: Some(ymd(2015, 3, 1)),
            ..Default::default()
        };
        assert!(matches!(
            estimate_time_itt(&s, &short, &[]),
            Err(RddError::InsufficientSpan { after: 59, .. })
        ));
    }

    #[test]
    fn missing_covariate_days_are_dropped() {
        let s = series(|d, k| (k % 5) as f64 + d.day() as f64 * 0.1);
        let annual = NamedSeries::new("c", Frequency::Annual, &[(ymd(2014, 1, 1), 1.0), (ymd(2015, 1, 1), 3.0)]);
        let est = estimate_time_itt(&s, &TimeSpec::default(), &[annual]).unwrap();
        // annual covariate is collinear with P over two years
        assert_eq!(est.dropped, vec!["c".to_string()]);
        let partial = NamedSeries::new("c", Frequency::Monthly, &[(ymd(2014, 1, 1), 1.0)]);
        let err = estimate_time_itt(&s, &TimeSpec::default(), &[partial]).unwrap_err();
        assert!(matches!(err, RddError::InsufficientSpan { before: 31, after: 0, .. }));
    }

    #[test]
    fn battery_skips_absent_series() {
        let s = series(|d, k| ((k * 7919) % 101) as f64 * 1e-4 + d.month() as f64 * 1e-3);
        let mut long = s.clone();
        // placebo dates need earlier years
        let span = DateRange::new(ymd(2011, 1, 1), ymd(2015, 12, 31)).unwrap();
        long.days = span.iter().collect();
        long.y = (0..long.days.len()).map(|k| ((k * 7919) % 101) as f64 * 1e-4).collect();
        long.group_size = vec![1; long.days.len()];
        long.hires = vec![0; long.days.len()];
        let runs = robustness_battery_time(&long, &TimeSpec::default(), &AuxiliarySeries::default(), &TimeBatteryConfig::default());
        assert_eq!(runs.len(), 8 + 5);
        let skipped = runs.iter().filter(|r| r.error.as_deref().is_some_and(|e| e.starts_with("skipped"))).count();
        assert_eq!(skipped, 5);
        let placebos: Vec<_> = runs.iter().filter(|r| r.tag == VariantTag::PlaceboDate).collect();
        assert!(placebos.iter().all(|r| r.estimate.is_some()));
        let dec = runs.iter().find(|r| r.tag == VariantTag::ExcludeDecember).unwrap();
        assert_eq!(dec.estimate.as_ref().unwrap().n_obs, 1826 - 31);
    }
}
