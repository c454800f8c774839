use clap::{Args, ValueEnum};
use ltu_core::dates::DateRange;
use ltu_panel::{emit_contracts, FormatDescriptor};
use ltu_synth::montecarlo::{bandwidth_study, indirect_study, monte_carlo, Level};
use ltu_synth::{hire_records, record_window, simulate_workers, to_records};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{in_module, Result};
use crate::output::Run;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub true_itt: Option<f64>,
    #[arg(long)]
    pub entries_per_day: Option<f64>,
}

impl SimulateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.simulate.dgp;
        if let Some(s) = self.seed {
            d.seed = s;
        }
        if let Some(n) = self.workers {
            d.n_workers = n;
        }
        if let Some(t) = self.true_itt {
            d.true_itt = t;
        }
        if let Some(e) = self.entries_per_day {
            d.entries_per_day = e;
        }
    }
}

#[derive(Serialize)]
struct Truth<'a> {
    dgp: &'a ltu_synth::DgpConfig,
    record_window: DateRange,
    n_workers: usize,
    n_records: usize,
    n_hires: usize,
    /// Policy effect averaged over the default estimation period.
    mean_itt_2011_2014: f64,
}

pub fn run_simulate(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let dgp = &cfg.simulate.dgp;
    let workers = simulate_workers(dgp).map_err(in_module("synth_dgp"))?;
    let records = to_records(&workers);
    run.write_with("contracts.csv", |w| {
        emit_contracts(w, &records, &FormatDescriptor::default()).map_err(in_module("panel_ingest"))
    })?;
    let hires = hire_records(&workers, &cfg.simulate.hires_period);
    run.write_with("hires.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for h in &hires {
            wtr.serialize(h).map_err(in_module("subsidy_calc"))?;
        }
        wtr.flush().map_err(in_module("subsidy_calc"))
    })?;
    run.write_json(
        "truth.json",
        &Truth {
            dgp,
            record_window: record_window(dgp),
            n_workers: workers.len(),
            n_records: records.len(),
            n_hires: hires.len(),
            mean_itt_2011_2014: dgp.mean_itt(&DateRange::years(2011, 2014)),
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Size, bias and coverage of both discontinuity estimators.
    Estimators,
    /// Recovery of a planted balance boundary.
    Bandwidth,
    /// Power and size of the near-far displacement test.
    Indirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Corpus,
    Spells,
    Cohorts,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long, value_enum, default_value = "estimators")]
    pub experiment: Experiment,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Policy effect of the estimator experiment.
    #[arg(long)]
    pub true_itt: Option<f64>,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
}

impl MonteCarloArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.monte_carlo;
        if let Some(r) = self.replications {
            m.estimators.replications = r;
            m.bandwidth.replications = r;
            m.indirect.replications = r;
        }
        if let Some(s) = self.seed {
            m.estimators.seed = s;
            m.bandwidth.seed = s;
            m.indirect.seed = s;
        }
        if let Some(t) = self.true_itt {
            m.dgp.true_itt = t;
        }
        if let Some(l) = self.level {
            m.estimators.level = match l {
                LevelArg::Corpus => Level::Corpus,
                LevelArg::Spells => Level::Spells,
                LevelArg::Cohorts => Level::Cohorts,
            };
        }
    }
}

#[derive(Serialize)]
struct HitRow {
    half_width: u32,
    count: usize,
}

#[derive(Serialize)]
struct PowerRow {
    replications: usize,
    noise_scale: f64,
    planted_displacement: f64,
    power: f64,
    null_detection_rate: f64,
}

pub fn run_monte_carlo(args: &MonteCarloArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let m = &cfg.monte_carlo;
    match args.experiment {
        Experiment::Estimators => {
            let r = monte_carlo(&m.dgp, &m.estimators).map_err(in_module("synth_dgp"))?;
            run.write_table("mc_summary", &r.summaries)?;
            run.write_json("mc_report.json", &r)?;
        }
        Experiment::Bandwidth => {
            let r = bandwidth_study(&m.bandwidth_panel, &m.bandwidth).map_err(in_module("synth_dgp"))?;
            let rows: Vec<HitRow> = r
                .half_widths
                .iter()
                .map(|&(half_width, count)| HitRow { half_width, count })
                .collect();
            run.write_table("bandwidth_hits", &rows)?;
            run.write_json("bandwidth_report.json", &r)?;
        }
        Experiment::Indirect => {
            let r = indirect_study(&m.indirect_panel, &m.indirect).map_err(in_module("synth_dgp"))?;
            let row = PowerRow {
                replications: r.study.replications,
                noise_scale: r.noise_scale,
                planted_displacement: r.planted_displacement,
                power: r.power,
                null_detection_rate: r.null_detection_rate,
            };
            run.write_table("indirect_power", &[row])?;
            run.write_json("indirect_report.json", &r)?;
        }
    }
    Ok(())
}
