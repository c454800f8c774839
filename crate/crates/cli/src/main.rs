//! `ltu`: ingestion, estimation, subsidy comparison and simulation from the
//! command line. Every run writes its tables as CSV and JSON into `--out`
//! together with `manifest.json`.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::estimate::{run_bandwidth, run_duration, run_indirect, run_time, BandwidthArgs, DurationArgs, IndirectArgs, TimeArgs};
use commands::ingest::{run_ingest, IngestArgs};
use commands::report::{run_report, ReportArgs};
use commands::simulate::{run_monte_carlo, run_simulate, MonteCarloArgs, SimulateArgs};
use commands::subsidy::{run_subsidy, SubsidyArgs};
use config::{RunConfig, CONFIG_ENV};
use error::{CliError, Result};
use output::Run;

#[derive(Debug, Parser)]
#[command(name = "ltu", version, about = "Evaluation pipeline for a long-term-unemployment hiring subsidy")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "ltu-out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a configuration key, `section.key=value` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Contract records to the duration-by-day cell panel and daily series.
    Ingest(IngestArgs),
    /// Local-randomisation window from covariate balance tests.
    SelectBandwidth(BandwidthArgs),
    /// Duration-threshold estimate, optionally with its robustness battery.
    EstimateDuration(DurationArgs),
    /// Time-threshold estimate on the daily series.
    EstimateTime(TimeArgs),
    /// Near-far displacement tests and the smoothed change by duration.
    IndirectEffects(IndirectArgs),
    /// Average credit under the two subsidy schemes, per year.
    SubsidyCompare(SubsidyArgs),
    /// Synthetic contract records and hires with known effects.
    Simulate(SimulateArgs),
    /// Monte Carlo studies of the estimators.
    MonteCarlo(MonteCarloArgs),
    /// Verifies earlier runs and gathers their estimate tables.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::SelectBandwidth(_) => "select-bandwidth",
            Command::EstimateDuration(_) => "estimate-duration",
            Command::EstimateTime(_) => "estimate-time",
            Command::IndirectEffects(_) => "indirect-effects",
            Command::SubsidyCompare(_) => "subsidy-compare",
            Command::Simulate(_) => "simulate",
            Command::MonteCarlo(_) => "monte-carlo",
            Command::Report(_) => "report",
        }
    }

    fn apply(&self, cfg: &mut RunConfig) {
        match self {
            Command::Ingest(a) => a.apply(cfg),
            Command::SelectBandwidth(a) => a.apply(cfg),
            Command::EstimateDuration(a) => a.apply(cfg),
            Command::EstimateTime(a) => a.apply(cfg),
            Command::IndirectEffects(a) => a.apply(cfg),
            Command::SubsidyCompare(a) => a.apply(cfg),
            Command::Simulate(a) => a.apply(cfg),
            Command::MonteCarlo(a) => a.apply(cfg),
            Command::Report(a) => a.apply(cfg),
        }
    }

    fn execute(&self, cfg: &RunConfig, run: &mut Run) -> Result<()> {
        match self {
            Command::Ingest(a) => run_ingest(a, cfg, run),
            Command::SelectBandwidth(a) => run_bandwidth(a, cfg, run),
            Command::EstimateDuration(a) => run_duration(a, cfg, run),
            Command::EstimateTime(a) => run_time(a, cfg, run),
            Command::IndirectEffects(a) => run_indirect(a, cfg, run),
            Command::SubsidyCompare(a) => run_subsidy(a, cfg, run),
            Command::Simulate(_) => run_simulate(cfg, run),
            Command::MonteCarlo(a) => run_monte_carlo(a, cfg, run),
            Command::Report(a) => run_report(a, cfg, run),
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cli.command.apply(&mut cfg);
    if cfg.threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig, run: &mut Run) -> Result<usize> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let threads = pool.current_num_threads();
    pool.install(|| cli.command.execute(cfg, run))?;
    Ok(threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let mut run = match Run::new(&cli.out) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let cfg = resolve(&cli);
    let snapshot = cfg.as_ref().map_or(serde_json::Value::Null, RunConfig::snapshot);
    let outcome = cfg.and_then(|cfg| execute(&cli, &cfg, &mut run));
    let threads = *outcome.as_ref().unwrap_or(&0);
    let error = outcome.as_ref().err().map(CliError::report);
    let written = run.finish(cli.command.name(), snapshot, threads, started.elapsed().as_secs_f64(), error);
    match (outcome, written) {
        (Err(e), _) | (Ok(_), Err(e)) => fail(&e),
        (Ok(_), Ok(_)) => ExitCode::SUCCESS,
    }
}

fn fail(e: &CliError) -> ExitCode {
    let report = e.report();
    eprintln!("{}", serde_json::to_string(&report).expect("error report serialises"));
    ExitCode::from(report.exit_code as u8)
}
