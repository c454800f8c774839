//! Monte Carlo studies: repeated simulation and estimation with derived seeds.
//!
//! Replication `i` uses `stream_seed(seed, i)` whatever the scheduling, and
//! results are gathered in replication order, so a report depends only on its
//! inputs. Wall time is kept out of the serialised report.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::Days;
use ltu_panel::{aggregate_cells, build_spells, daily_collapse, AggregateSpec, CellFilters, CellPanel, DurationRange, SpellOptions};
use ltu_rdd::{
    estimate_itt, estimate_time_itt, near_far_welch, select_bandwidth, BalanceConfig, DurationSpec, RddError,
    SampleUnit, TimeSpec, WelchConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DgpConfig;
use crate::corpus::{record_window, simulate_workers, to_records, WindowSampler};
use crate::panel_dgp::{simulate_panel, PanelDgpConfig};
use crate::rng::stream_seed;
use crate::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Worker histories, contract records and spell construction.
    Corpus,
    /// Spells drawn at the duration window.
    Spells,
    /// Cells drawn cohort by cohort at the duration window; fixed windows only.
    Cohorts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    Fixed(DurationRange),
    /// Chosen by balance tests on a panel spanning `search`.
    Selected {
        balance: BalanceConfig,
        max_half_width: u32,
        search: DurationRange,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorStudy {
    pub replications: usize,
    pub seed: u64,
    pub level: Level,
    pub window: WindowRule,
    /// Duration-RDD specification; its window is replaced per replication.
    pub duration: Option<DurationSpec>,
    pub time: Option<TimeSpec>,
    pub alpha: f64,
}

impl Default for EstimatorStudy {
    fn default() -> Self {
        Self {
            replications: 100,
            seed: 1,
            level: Level::Cohorts,
            window: WindowRule::Fixed(DurationRange { lo: 714, hi: 744 }),
            duration: Some(DurationSpec::default()),
            time: Some(TimeSpec::default()),
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub estimate: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub window: DurationRange,
    pub duration: Option<Draw>,
    pub relative_effect: Option<f64>,
    pub time: Option<Draw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub truth: f64,
    pub replications: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Bias over the truth; absent when the truth is zero.
    pub relative_bias: Option<f64>,
    pub empirical_sd: f64,
    /// Standard error of `mean_estimate`.
    pub mc_se: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
}

impl EstimatorSummary {
    pub fn from_draws(estimator: &str, truth: f64, alpha: f64, draws: &[Draw]) -> Self {
        let n = draws.len() as f64;
        let mean = draws.iter().map(|d| d.estimate).sum::<f64>() / n;
        let var = draws.iter().map(|d| (d.estimate - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let frac = |f: &dyn Fn(&Draw) -> bool| draws.iter().filter(|d| f(d)).count() as f64 / n;
        Self {
            estimator: estimator.to_string(),
            truth,
            replications: draws.len(),
            mean_estimate: mean,
            bias: mean - truth,
            relative_bias: (truth != 0.0).then(|| (mean - truth) / truth),
            empirical_sd: var.sqrt(),
            mc_se: (var / n).sqrt(),
            mean_se: draws.iter().map(|d| d.se).sum::<f64>() / n,
            coverage: frac(&|d| d.ci95.0 <= truth && truth <= d.ci95.1),
            rejection_rate: frac(&|d| d.p_value < alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub dgp: DgpConfig,
    pub study: EstimatorStudy,
    pub summaries: Vec<EstimatorSummary>,
    pub mean_relative_effect: Option<f64>,
    /// Replications per selected window.
    pub windows: Vec<(DurationRange, usize)>,
    pub outcomes: Vec<ReplicationOutcome>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// Jump in the pooled window outcome at the time threshold implied by the DGP:
/// the level shift plus the change in the ITT term, assuming group sizes
/// roughly even across the window.
pub fn time_truth(dgp: &DgpConfig, window: DurationRange, threshold: chrono::NaiveDate) -> f64 {
    let treated = window.iter().filter(|&i| i >= dgp.threshold).count() as f64 / window.len() as f64;
    let itt_on = |d: chrono::NaiveDate| {
        if dgp.policy.contains(d) {
            dgp.itt_in_year(chrono::Datelike::year(&d))
        } else {
            0.0
        }
    };
    let before = threshold - Days::new(1);
    let jump = |d| if d >= dgp.time_jump_date { dgp.time_jump } else { 0.0 };
    (jump(threshold) - jump(before)) + treated * (itt_on(threshold) - itt_on(before))
}

fn boxed<E: std::error::Error + Send + Sync + 'static>(index: usize) -> impl FnOnce(E) -> SynthError {
    move |e| SynthError::Replication {
        index,
        source: Box::new(e),
    }
}

enum Source {
    Corpus,
    Spells(WindowSampler),
    Cohorts(WindowSampler),
}

fn replicate(
    dgp: &DgpConfig,
    study: &EstimatorStudy,
    source: &Source,
    index: usize,
) -> Result<ReplicationOutcome, SynthError> {
    let seed = stream_seed(study.seed, index as u64);
    let (durations, track) = match &study.window {
        WindowRule::Fixed(w) => (*w, false),
        WindowRule::Selected { search, .. } => (*search, true),
    };
    let spec = AggregateSpec {
        days: dgp.period,
        durations,
        filters: CellFilters::default(),
        track_covariates: track,
    };
    let panel = match source {
        Source::Cohorts(s) => s.sample_panel(seed).map_err(boxed(index))?,
        Source::Spells(s) => aggregate_cells(&s.sample(seed), &spec),
        Source::Corpus => {
            let cfg = DgpConfig { seed, ..dgp.clone() };
            let records = to_records(&simulate_workers(&cfg).map_err(boxed(index))?);
            let spells = build_spells(&records, record_window(&cfg), &SpellOptions::default()).map_err(boxed(index))?;
            aggregate_cells(&spells.spells, &spec)
        }
    };
    let window = match &study.window {
        WindowRule::Fixed(w) => *w,
        WindowRule::Selected {
            balance, max_half_width, ..
        } => select_bandwidth(&panel, balance, *max_half_width).map_err(boxed(index))?.window,
    };
    let mut out = ReplicationOutcome {
        index,
        seed,
        window,
        duration: None,
        relative_effect: None,
        time: None,
    };
    if let Some(spec) = &study.duration {
        let spec = DurationSpec {
            window,
            ..spec.clone()
        };
        let est = estimate_itt(&panel, &spec).map_err(boxed(index))?;
        out.duration = Some(Draw {
            estimate: est.beta,
            se: est.se,
            ci95: est.ci95,
            p_value: est.p_value,
        });
        out.relative_effect = est.relative_effect;
    }
    if let Some(spec) = &study.time {
        let series = daily_collapse(&panel, window, dgp.period).map_err(boxed(index))?;
        let est = estimate_time_itt(&series, spec, &[]).map_err(boxed(index))?;
        out.time = Some(Draw {
            estimate: est.jump,
            se: est.jump_se,
            ci95: est.jump_ci95,
            p_value: est.jump_p,
        });
    }
    Ok(out)
}

/// Simulates and estimates `study.replications` times.
pub fn monte_carlo(dgp: &DgpConfig, study: &EstimatorStudy) -> Result<McReport, SynthError> {
    let started = Instant::now();
    if study.replications == 0 {
        return Err(SynthError::InvalidConfig("replications must be positive".into()));
    }
    dgp.validate()?;
    let durations = match &study.window {
        WindowRule::Fixed(w) => *w,
        WindowRule::Selected { search, .. } => *search,
    };
    let source = match (study.level, &study.window) {
        (Level::Corpus, _) => Source::Corpus,
        (Level::Spells, _) => Source::Spells(WindowSampler::new(dgp, durations)?),
        (Level::Cohorts, WindowRule::Fixed(_)) => Source::Cohorts(WindowSampler::new(dgp, durations)?),
        (Level::Cohorts, WindowRule::Selected { .. }) => {
            return Err(SynthError::InvalidConfig(
                "cohort-level panels carry no covariates to select a window with".into(),
            ))
        }
    };
    let outcomes = (0..study.replications)
        .into_par_iter()
        .map(|i| replicate(dgp, study, &source, i))
        .collect::<Result<Vec<_>, _>>()?;

    let mut windows: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for o in &outcomes {
        *windows.entry((o.window.lo, o.window.hi)).or_default() += 1;
    }
    let windows: Vec<(DurationRange, usize)> = windows
        .into_iter()
        .map(|((lo, hi), n)| (DurationRange { lo, hi }, n))
        .collect();

    let mut summaries = Vec::new();
    let duration_draws: Vec<Draw> = outcomes.iter().filter_map(|o| o.duration).collect();
    if let Some(spec) = &study.duration {
        summaries.push(EstimatorSummary::from_draws(
            "duration_rdd",
            dgp.mean_itt(&spec.period),
            study.alpha,
            &duration_draws,
        ));
    }
    let time_draws: Vec<Draw> = outcomes.iter().filter_map(|o| o.time).collect();
    if let Some(spec) = &study.time {
        // the truth depends on the window; take the most frequent one
        let w = windows.iter().max_by_key(|(_, n)| *n).expect("at least one replication").0;
        summaries.push(EstimatorSummary::from_draws(
            "time_rdd",
            time_truth(dgp, w, spec.threshold),
            study.alpha,
            &time_draws,
        ));
    }
    let rel: Vec<f64> = outcomes.iter().filter_map(|o| o.relative_effect).collect();
    Ok(McReport {
        dgp: dgp.clone(),
        study: study.clone(),
        summaries,
        mean_relative_effect: (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64),
        windows,
        outcomes,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthStudy {
    pub replications: usize,
    pub seed: u64,
    pub balance: BalanceConfig,
    pub max_half_width: u32,
    /// Window a correct selection returns.
    pub expected: DurationRange,
}

impl Default for BandwidthStudy {
    fn default() -> Self {
        Self {
            replications: 200,
            seed: 3,
            balance: BalanceConfig::default(),
            max_half_width: 25,
            expected: DurationRange { lo: 714, hi: 743 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub panel: PanelDgpConfig,
    pub study: BandwidthStudy,
    pub hits: usize,
    pub hit_rate: f64,
    /// Selected half-widths and how often each came up; 0 stands for no
    /// balanced window.
    pub half_widths: Vec<(u32, usize)>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// How often balance-based selection recovers the planted window.
pub fn bandwidth_study(panel: &PanelDgpConfig, study: &BandwidthStudy) -> Result<BandwidthReport, SynthError> {
    let started = Instant::now();
    if study.replications == 0 {
        return Err(SynthError::InvalidConfig("replications must be positive".into()));
    }
    panel.validate()?;
    let picks = (0..study.replications)
        .into_par_iter()
        .map(|i| {
            let cfg = PanelDgpConfig {
                seed: stream_seed(study.seed, i as u64),
                ..panel.clone()
            };
            let p = simulate_panel(&cfg).map_err(boxed(i))?;
            match select_bandwidth(&p, &study.balance, study.max_half_width) {
                Ok(sel) => Ok(Some(sel.window)),
                Err(RddError::NoBalancedWindow { .. }) => Ok(None),
                Err(e) => Err(boxed(i)(e)),
            }
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let hits = picks.iter().filter(|w| **w == Some(study.expected)).count();
    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for w in &picks {
        let h = w.map_or(0, |w| study.balance.threshold - w.lo);
        *hist.entry(h).or_default() += 1;
    }
    Ok(BandwidthReport {
        panel: panel.clone(),
        study: study.clone(),
        hits,
        hit_rate: hits as f64 / picks.len() as f64,
        half_widths: hist.into_iter().collect(),
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndirectStudy {
    pub replications: usize,
    pub seed: u64,
    /// Must hold one year and one far window: each replication is one test.
    pub welch: WelchConfig,
    /// Null replications used to measure the noise scale.
    pub pilot_replications: usize,
    /// Planted displacement in units of the noise scale.
    pub noise_multiple: f64,
}

impl Default for IndirectStudy {
    fn default() -> Self {
        Self {
            replications: 500,
            seed: 9,
            welch: WelchConfig {
                years: vec![2014],
                far: vec![DurationRange { lo: 545, hi: 560 }],
                unit: SampleUnit::Daily,
                ..WelchConfig::default()
            },
            pilot_replications: 50,
            noise_multiple: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectReport {
    pub panel: PanelDgpConfig,
    pub study: IndirectStudy,
    /// Mean standard error of the near-minus-far change over the pilot runs.
    pub noise_scale: f64,
    pub planted_displacement: f64,
    /// Share of planted panels with a positive, significant near-far gap.
    pub power: f64,
    /// Share of null panels whose interval excludes zero, either sign.
    pub null_detection_rate: f64,
    #[serde(skip)]
    pub runtime_secs: f64,
}

const PILOT_STREAM: u64 = 0x5049_4C4F_5400;

fn welch_row(panel: &PanelDgpConfig, seed: u64, welch: &WelchConfig, index: usize) -> Result<ltu_rdd::NearFarRow, SynthError> {
    let cfg = PanelDgpConfig { seed, ..panel.clone() };
    let p: CellPanel = simulate_panel(&cfg).map_err(boxed(index))?;
    let mut rows = near_far_welch(&p, welch).map_err(boxed(index))?;
    Ok(rows.remove(0))
}

/// Power against a displacement planted at `noise_multiple` times the noise
/// scale, and the false-detection rate on null panels.
pub fn indirect_study(panel: &PanelDgpConfig, study: &IndirectStudy) -> Result<IndirectReport, SynthError> {
    let started = Instant::now();
    if study.welch.years.len() != 1 || study.welch.far.len() != 1 {
        return Err(SynthError::InvalidConfig("the study tests one year against one far window".into()));
    }
    if study.replications == 0 || study.pilot_replications == 0 {
        return Err(SynthError::InvalidConfig("replications must be positive".into()));
    }
    let null = PanelDgpConfig {
        displacement: 0.0,
        near: study.welch.near,
        ..panel.clone()
    };
    null.validate()?;
    let pilot = (0..study.pilot_replications)
        .into_par_iter()
        .map(|k| welch_row(&null, stream_seed(study.seed ^ PILOT_STREAM, k as u64), &study.welch, k))
        .collect::<Result<Vec<_>, _>>()?;
    let noise_scale = pilot.iter().map(|r| r.test.std_err).sum::<f64>() / pilot.len() as f64;
    let delta = study.noise_multiple * noise_scale;

    let base = null.baseline.table(null.durations.hi)?;
    let min_season = null.seasonal_profile.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = null.near.iter().map(|i| base[i as usize]).fold(f64::INFINITY, f64::min) * min_season;
    if delta > floor {
        return Err(SynthError::InvalidConfig(format!(
            "planted displacement {delta:e} exceeds the near-window hazard {floor:e}; raise the group size"
        )));
    }
    let planted = PanelDgpConfig {
        displacement: delta,
        ..null.clone()
    };
    let runs = (0..study.replications)
        .into_par_iter()
        .map(|i| {
            let n = welch_row(&null, stream_seed(study.seed, 2 * i as u64), &study.welch, i)?;
            let p = welch_row(&planted, stream_seed(study.seed, 2 * i as u64 + 1), &study.welch, i)?;
            Ok((n.detected_two_sided, p.detected))
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let n = runs.len() as f64;
    Ok(IndirectReport {
        panel: planted,
        study: study.clone(),
        noise_scale,
        planted_displacement: delta,
        power: runs.iter().filter(|r| r.1).count() as f64 / n,
        null_detection_rate: runs.iter().filter(|r| r.0).count() as f64 / n,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}
