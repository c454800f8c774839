use std::io::BufReader;
use std::path::PathBuf;

use clap::Args;
use ltu_subsidy::{compare_averages, compare_yearly, read_input, FractionMode, SubsidyInput};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{in_module, Result};
use crate::output::Run;

#[derive(Debug, Args)]
pub struct SubsidyArgs {
    /// `year,wage,firm_class` hires or `year,avg_407,avg_190` averages.
    #[arg(long)]
    pub input: PathBuf,
    /// Years to compare (repeatable); all by default.
    #[arg(long = "year")]
    pub years: Vec<i32>,
    /// Apply one refund share of the targeted scheme to every hire.
    #[arg(long)]
    pub blended: Option<f64>,
}

impl SubsidyArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if !self.years.is_empty() {
            cfg.subsidy.years = self.years.clone();
        }
        if let Some(f) = self.blended {
            cfg.subsidy.rates.mode = FractionMode::Blended(f);
        }
    }
}

#[derive(Serialize)]
struct Row {
    year: i32,
    n_hires: Option<usize>,
    avg_407: f64,
    avg_190: f64,
    rel_diff: f64,
    rel_diff_3dp: String,
}

pub fn run_subsidy(args: &SubsidyArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let f = run.open_input(&args.input)?;
    let input = read_input(BufReader::new(f)).map_err(in_module("subsidy_calc"))?;
    let rows = match input {
        SubsidyInput::Hires(recs) => compare_yearly(&recs, &cfg.subsidy.years, &cfg.subsidy.rates),
        SubsidyInput::Averages(mut avgs) => {
            if !cfg.subsidy.years.is_empty() {
                avgs.retain(|r| cfg.subsidy.years.contains(&r.year));
            }
            compare_averages(&avgs)
        }
    }
    .map_err(in_module("subsidy_calc"))?;
    let table: Vec<Row> = rows
        .into_iter()
        .map(|r| Row {
            year: r.year,
            n_hires: r.n_hires,
            avg_407: r.avg_407,
            avg_190: r.avg_190,
            rel_diff: r.rel_diff,
            rel_diff_3dp: format!("{:.3}", r.rel_diff),
        })
        .collect();
    run.write_table("subsidy_comparison", &table)
}
