use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use clap::Args;
use ltu_core::dates::DateRange;
use ltu_panel::{read_cells_csv, read_daily_csv, CellFilters, CellPanel, Covariate, DailySeries, DurationRange};
use ltu_rdd::{
    estimate_itt, estimate_time_itt, near_far_welch, outcome_diff_by_duration, placebo_battery, robustness_battery_time,
    select_bandwidth, smoothed_diff_curve, stars, yearly_effect_correlation, AuxiliarySeries, Frequency, NamedSeries,
    VariantTag, Weighting,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::EstimateRow;
use crate::config::{parse_days, parse_durations, parse_month, RunConfig};
use crate::error::{in_module, CliError, Result};
use crate::output::{Axis, Marker, PlotSpec, Run};

fn read_cells(run: &mut Run, path: &Path) -> Result<CellPanel> {
    let f = run.open_input(path)?;
    read_cells_csv(BufReader::new(f), CellFilters::default()).map_err(in_module("panel_ingest"))
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    /// Cell panel written by `ingest`; needs covariate shares.
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long)]
    pub max_half_width: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Restrict the balance tests to these days.
    #[arg(long, value_parser = parse_days)]
    pub period: Option<DateRange>,
}

impl BandwidthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.max_half_width {
            cfg.bandwidth.max_half_width = m;
        }
        if let Some(a) = self.alpha {
            cfg.bandwidth.balance.alpha = a;
        }
        if self.period.is_some() {
            cfg.bandwidth.balance.period = self.period;
        }
    }
}

#[derive(Serialize)]
struct BalanceRow {
    lo: u32,
    hi: u32,
    covariate: Covariate,
    mean_diff: Option<f64>,
    statistic: Option<f64>,
    p_value: f64,
    alpha: f64,
    window_balanced: bool,
}

pub fn run_bandwidth(args: &BandwidthArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let panel = read_cells(run, &args.cells)?;
    let sel = select_bandwidth(&panel, &cfg.bandwidth.balance, cfg.bandwidth.max_half_width)
        .map_err(in_module("bandwidth_select"))?;
    let rows: Vec<BalanceRow> = sel
        .trail
        .iter()
        .flat_map(|r| {
            r.per_covariate.iter().map(move |c| BalanceRow {
                lo: r.window.lo,
                hi: r.window.hi,
                covariate: c.covariate,
                mean_diff: c.test.as_ref().map(|t| t.mean_diff),
                statistic: c.test.as_ref().map(|t| t.statistic),
                p_value: c.p_value,
                alpha: r.alpha,
                window_balanced: r.balanced,
            })
        })
        .collect();
    run.write_table("balance_tests", &rows)?;
    run.write_json("bandwidth.json", &sel)
}

#[derive(Debug, Args)]
pub struct DurationArgs {
    #[arg(long)]
    pub cells: PathBuf,
    /// Estimation window, `lo:hi`.
    #[arg(long, value_parser = parse_durations)]
    pub window: Option<DurationRange>,
    #[arg(long, value_parser = parse_days)]
    pub period: Option<DateRange>,
    /// Add the default covariate shares as regressors.
    #[arg(long)]
    pub covariates: bool,
    /// Weight cells by group size.
    #[arg(long)]
    pub weighted: bool,
    /// Also run the placebo and robustness battery.
    #[arg(long)]
    pub battery: bool,
    /// Panel restricted to southern regions, for the battery.
    #[arg(long)]
    pub mezzogiorno_cells: Option<PathBuf>,
    /// `year,count` file; per-year effects are correlated with the counts.
    #[arg(long)]
    pub yearly_counts: Option<PathBuf>,
}

impl DurationArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.duration;
        if let Some(w) = self.window {
            s.window = w;
        }
        if let Some(p) = self.period {
            s.period = p;
        }
        if self.covariates {
            s.covariates = Covariate::regression_default();
        }
        if self.weighted {
            s.weighting = Weighting::GroupSize;
        }
    }
}

#[derive(Deserialize)]
struct YearCount {
    year: i32,
    count: f64,
}

#[derive(Serialize)]
struct YearlyRow {
    year: i32,
    beta: f64,
    se: f64,
    p_value: f64,
    stars: &'static str,
    count: f64,
}

pub fn run_duration(args: &DurationArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let panel = read_cells(run, &args.cells)?;
    let base = estimate_itt(&panel, &cfg.duration).map_err(in_module("duration_rdd"))?;
    let mut rows = vec![EstimateRow::duration(&super::tag_name(&base.spec_tag), &base)];
    let mut details = json!({ "estimate": base });

    if args.battery {
        let mezz = match &args.mezzogiorno_cells {
            Some(p) => Some(read_cells(run, p)?),
            None => None,
        };
        let runs = placebo_battery(&panel, &cfg.duration, &cfg.battery, mezz.as_ref());
        rows = runs.iter().map(EstimateRow::from_duration_run).collect();
        details["battery"] = json!(runs);
    }
    run.write_table("duration_estimates", &rows)?;

    if let Some(path) = &args.yearly_counts {
        let f = run.open_input(path)?;
        let counts = csv::Reader::from_reader(f)
            .deserialize()
            .collect::<std::result::Result<Vec<YearCount>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let years: Vec<i32> = counts.iter().map(|c| c.year).collect();
        let values: Vec<f64> = counts.iter().map(|c| c.count).collect();
        let corr = yearly_effect_correlation(&panel, &cfg.duration, &years, &values).map_err(in_module("duration_rdd"))?;
        let rows: Vec<YearlyRow> = corr
            .years
            .iter()
            .zip(&corr.estimates)
            .zip(&corr.counts)
            .map(|((&year, e), &count)| YearlyRow {
                year,
                beta: e.beta,
                se: e.se,
                p_value: e.p_value,
                stars: stars(e.p_value),
                count,
            })
            .collect();
        run.write_table("yearly_effects", &rows)?;
        details["yearly_correlation"] = json!(corr.correlation);
    }
    run.write_json("duration_details.json", &details)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    /// Daily series written by `ingest`.
    #[arg(long)]
    pub daily: PathBuf,
    #[arg(long)]
    pub threshold: Option<NaiveDate>,
    /// Drop a calendar month, `YYYY-MM` (repeatable).
    #[arg(long = "exclude-month", value_parser = parse_month)]
    pub exclude_months: Vec<(i32, u32)>,
    /// Keep the trend uncentred.
    #[arg(long)]
    pub no_center: bool,
    #[arg(long)]
    pub battery: bool,
    /// `series,frequency,date,value` file of auxiliary regressors: gdp,
    /// consumption, unemployment_share, anything else is a composition share.
    #[arg(long)]
    pub aux: Option<PathBuf>,
}

impl TimeArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.time;
        if let Some(t) = self.threshold {
            s.threshold = t;
        }
        if !self.exclude_months.is_empty() {
            s.exclude_months = self.exclude_months.clone();
            if s.variant == VariantTag::Standard && s.exclude_months.iter().all(|&(_, m)| m == 12) {
                s.variant = VariantTag::ExcludeDecember;
            }
        }
        if self.no_center {
            s.center_time = false;
        }
    }
}

#[derive(Deserialize)]
struct AuxPoint {
    series: String,
    frequency: Frequency,
    date: NaiveDate,
    value: f64,
}

fn read_aux(run: &mut Run, path: &Path) -> Result<AuxiliarySeries> {
    let f = run.open_input(path)?;
    let points = csv::Reader::from_reader(f)
        .deserialize()
        .collect::<std::result::Result<Vec<AuxPoint>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut grouped: BTreeMap<String, (Frequency, Vec<(NaiveDate, f64)>)> = BTreeMap::new();
    for p in points {
        let e = grouped.entry(p.series.clone()).or_insert((p.frequency, Vec::new()));
        if e.0 != p.frequency {
            return Err(CliError::Config(format!("series {} mixes frequencies", p.series)));
        }
        e.1.push((p.date, p.value));
    }
    let mut aux = AuxiliarySeries::default();
    for (name, (freq, pts)) in grouped {
        let s = NamedSeries::new(name.clone(), freq, &pts);
        match name.as_str() {
            "gdp" => aux.gdp = Some(s),
            "consumption" => aux.consumption = Some(s),
            "unemployment_share" => aux.unemployment_share = Some(s),
            _ => aux.composition.push(s),
        }
    }
    Ok(aux)
}

#[derive(Serialize)]
struct FitRow {
    day: NaiveDate,
    y: f64,
    fitted: f64,
    counterfactual: f64,
}

#[derive(Serialize)]
struct MonthRow {
    year: i32,
    month: u32,
    share: Option<f64>,
    hires: u64,
    group_size: u64,
}

pub fn run_time(args: &TimeArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let f = run.open_input(&args.daily)?;
    let series = read_daily_csv(BufReader::new(f), cfg.ingest.daily_window).map_err(in_module("panel_ingest"))?;
    let base = estimate_time_itt(&series, &cfg.time, &[]).map_err(in_module("time_rdd"))?;
    let mut rows = vec![EstimateRow::time(&super::tag_name(&base.variant_tag), &base)];
    let mut details = json!({ "estimate": base });
    if args.battery {
        let aux = match &args.aux {
            Some(p) => read_aux(run, p)?,
            None => AuxiliarySeries::default(),
        };
        let runs = robustness_battery_time(&series, &cfg.time, &aux, &cfg.time_battery);
        rows = runs.iter().map(EstimateRow::from_time_run).collect();
        details["battery"] = json!(runs);
    }
    run.write_table("time_estimates", &rows)?;
    run.write_json("time_details.json", &details)?;

    let fit: Vec<FitRow> = base
        .fitted
        .iter()
        .map(|p| FitRow {
            day: p.day,
            y: p.y,
            fitted: p.fitted,
            counterfactual: p.counterfactual,
        })
        .collect();
    let threshold_marker = Marker {
        axis: "x",
        value: json!(cfg.time.threshold),
        label: "policy date".into(),
    };
    run.write_plot(
        "time_fit",
        &fit,
        PlotSpec {
            title: "Daily hiring share with fitted trend".into(),
            kind: "line",
            data: String::new(),
            x: Axis::new("day", "day"),
            y: vec![
                Axis::new("y", "hiring share"),
                Axis::new("fitted", "fitted"),
                Axis::new("counterfactual", "fitted without the jump"),
            ],
            markers: vec![threshold_marker.clone()],
        },
    )?;
    run.write_plot(
        "monthly_shares",
        &monthly_shares(&series),
        PlotSpec {
            title: "Monthly hiring share by year".into(),
            kind: "line",
            data: String::new(),
            x: Axis::new("month", "month"),
            y: vec![Axis::new("share", "hiring share")],
            markers: vec![Marker {
                axis: "x",
                value: json!(cfg.time.threshold.month()),
                label: format!("policy date in {}", cfg.time.threshold.year()),
            }],
        },
    )
}

/// Group-size weighted share per calendar month; falls back to the plain
/// mean of `y` when the series carries no counts.
fn monthly_shares(series: &DailySeries) -> Vec<MonthRow> {
    let mut acc: BTreeMap<(i32, u32), (u64, u64, f64, usize)> = BTreeMap::new();
    for k in 0..series.len() {
        let d = series.days[k];
        let e = acc.entry((d.year(), d.month())).or_default();
        e.0 += series.hires[k];
        e.1 += series.group_size[k];
        if series.y[k].is_finite() {
            e.2 += series.y[k];
            e.3 += 1;
        }
    }
    acc.into_iter()
        .map(|((year, month), (h, n, ysum, ny))| MonthRow {
            year,
            month,
            share: if n > 0 {
                Some(h as f64 / n as f64)
            } else {
                (ny > 0).then(|| ysum / ny as f64)
            },
            hires: h,
            group_size: n,
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct IndirectArgs {
    #[arg(long)]
    pub cells: PathBuf,
    /// Years compared with the after year (repeatable).
    #[arg(long = "year")]
    pub years: Vec<i32>,
    /// Far control windows, `lo:hi` (repeatable).
    #[arg(long = "far", value_parser = parse_durations)]
    pub far: Vec<DurationRange>,
    #[arg(long)]
    pub smoothing_bandwidth: Option<f64>,
}

impl IndirectArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.indirect;
        if !self.years.is_empty() {
            c.welch.years = self.years.clone();
        }
        if !self.far.is_empty() {
            c.welch.far = self.far.clone();
        }
        if self.smoothing_bandwidth.is_some() {
            c.smoothing_bandwidth = self.smoothing_bandwidth;
        }
    }
}

#[derive(Serialize)]
struct NearFarTableRow {
    year: i32,
    near_lo: u32,
    near_hi: u32,
    far_lo: u32,
    far_hi: u32,
    mean_diff: f64,
    std_err: f64,
    statistic: f64,
    dof: f64,
    p_value: f64,
    stars: &'static str,
    one_sided_p: f64,
    ci_lo: f64,
    ci_hi: f64,
    n_near: usize,
    n_far: usize,
    detected: bool,
    detected_two_sided: bool,
}

pub fn run_indirect(args: &IndirectArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let panel = read_cells(run, &args.cells)?;
    let c = &cfg.indirect;
    let welch = near_far_welch(&panel, &c.welch).map_err(in_module("indirect_fx"))?;
    let rows: Vec<NearFarTableRow> = welch
        .iter()
        .map(|r| NearFarTableRow {
            year: r.year,
            near_lo: r.near.lo,
            near_hi: r.near.hi,
            far_lo: r.far.lo,
            far_hi: r.far.hi,
            mean_diff: r.test.mean_diff,
            std_err: r.test.std_err,
            statistic: r.test.statistic,
            dof: r.test.dof,
            p_value: r.test.p_value,
            stars: stars(r.test.p_value),
            one_sided_p: r.one_sided_p,
            ci_lo: r.test.ci95.0,
            ci_hi: r.test.ci95.1,
            n_near: r.n_near,
            n_far: r.n_far,
            detected: r.detected,
            detected_two_sided: r.detected_two_sided,
        })
        .collect();
    run.write_table("near_far", &rows)?;

    let diffs = outcome_diff_by_duration(&panel, c.welch.threshold, c.before, c.after).map_err(in_module("indirect_fx"))?;
    run.write_table("diff_by_duration", &diffs)?;
    let curve = smoothed_diff_curve(&diffs, c.welch.threshold, c.smoothing_bandwidth).map_err(in_module("indirect_fx"))?;
    let near = c.welch.near;
    run.write_plot(
        "smoothed_diff",
        &curve.points,
        PlotSpec {
            title: format!(
                "Change in hiring share by duration (local polynomial, degree {}, bandwidth {:.2})",
                curve.degree, curve.bandwidth
            ),
            kind: "scatter_line",
            data: String::new(),
            x: Axis::new("duration", "days since the end of the last contract"),
            y: vec![Axis::new("raw", "after minus before"), Axis::new("smoothed", "smoothed")],
            markers: vec![
                Marker {
                    axis: "x",
                    value: json!(c.welch.threshold),
                    label: "eligibility threshold".into(),
                },
                Marker {
                    axis: "x",
                    value: json!(near.lo),
                    label: "start of the near window".into(),
                },
                Marker {
                    axis: "y",
                    value: json!(0.0),
                    label: "no change".into(),
                },
            ],
        },
    )
}

