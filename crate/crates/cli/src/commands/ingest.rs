use std::io::BufReader;
use std::path::PathBuf;

use clap::Args;
use ltu_core::dates::DateRange;
use ltu_panel::{
    aggregate_cells, build_spells, daily_collapse, parse_contracts, write_cells_csv, write_daily_csv, AggregateSpec,
    CellFilters, CellPanel, ContractType, DurationRange, FormatDescriptor, PanelManifest, RegionFilter, SpellOptions,
    THRESHOLD_DAYS,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_days, parse_durations, RunConfig};
use crate::error::{in_module, CliError, Result};
use crate::output::{Axis, Marker, PlotSpec, Run};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Contract records, one row per contract.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Panel days, `YYYY-MM-DD:YYYY-MM-DD`.
    #[arg(long, value_parser = parse_days)]
    pub days: Option<DateRange>,
    /// Panel durations, `lo:hi`.
    #[arg(long, value_parser = parse_durations)]
    pub durations: Option<DurationRange>,
    /// Count only hires into these contract types (repeatable).
    #[arg(long = "contract-type")]
    pub contract_types: Vec<ContractType>,
    /// all, mezzogiorno or center_north.
    #[arg(long, value_parser = parse_region)]
    pub region: Option<RegionFilter>,
    #[arg(long)]
    pub no_covariates: bool,
}

fn parse_region(s: &str) -> std::result::Result<RegionFilter, String> {
    match s {
        "all" => Ok(RegionFilter::All),
        "mezzogiorno" => Ok(RegionFilter::Mezzogiorno),
        "center_north" => Ok(RegionFilter::CenterNorth),
        _ => Err(format!("unknown region filter {s:?}")),
    }
}

impl IngestArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.ingest;
        if let Some(d) = self.delimiter {
            c.delimiter = d;
        }
        if let Some(d) = self.days {
            c.days = d;
        }
        if let Some(d) = self.durations {
            c.durations = d;
        }
        if !self.contract_types.is_empty() {
            c.hire_types = self.contract_types.clone();
        }
        if let Some(r) = &self.region {
            c.regions = r.clone();
        }
        if self.no_covariates {
            c.track_covariates = false;
        }
    }
}

#[derive(Serialize)]
struct HistogramRow {
    duration: u32,
    group_size: u64,
    hires: u64,
    share: Option<f64>,
}

pub fn run_ingest(args: &IngestArgs, cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let c = &cfg.ingest;
    let delimiter =
        u8::try_from(c.delimiter).map_err(|_| CliError::Config(format!("delimiter {:?} is not ASCII", c.delimiter)))?;
    let file = run.open_input(&args.input)?;
    let (records, diagnostics) =
        parse_contracts(BufReader::new(file), &FormatDescriptor { delimiter }).map_err(in_module("panel_ingest"))?;

    let first = records.iter().map(|r| r.start_date).min().unwrap_or(c.days.start);
    let window = DateRange {
        start: first.min(c.days.start),
        end: c.days.end,
    };
    let opts = SpellOptions {
        parasubordinate_ends_spell: c.parasubordinate_ends_spell,
        ..SpellOptions::default()
    };
    let set = build_spells(&records, window, &opts).map_err(in_module("panel_ingest"))?;
    let filters = CellFilters {
        regions: c.regions.clone(),
        hire_types: (!c.hire_types.is_empty()).then(|| c.hire_types.clone()),
    };
    let spec = AggregateSpec {
        days: c.days,
        durations: c.durations,
        filters: filters.clone(),
        track_covariates: c.track_covariates,
    };
    let panel = aggregate_cells(&set.spells, &spec);

    run.write_with("cells.csv", |w| write_cells_csv(w, &panel).map_err(in_module("panel_ingest")))?;
    let manifest = PanelManifest {
        days: c.days,
        durations: c.durations,
        filters,
        track_covariates: c.track_covariates,
        n_records: records.len(),
        n_parse_diagnostics: diagnostics.len(),
        n_workers: set.worker_ids.len(),
        n_spells: set.spells.len(),
        n_cells: panel.n_cells(),
        n_empty_cells: panel.n_empty(),
        out_of_range_total: panel.out_of_range_total(),
    };
    run.write_json("panel_manifest.json", &manifest)?;
    run.write_json("parse_diagnostics.json", &diagnostics)?;

    if c.durations.covers(&c.daily_window) {
        if let Some(days) = c.daily_days.intersect(&c.days) {
            let series = daily_collapse(&panel, c.daily_window, days).map_err(in_module("panel_ingest"))?;
            run.write_with("daily.csv", |w| write_daily_csv(w, &series).map_err(in_module("panel_ingest")))?;
        }
    }
    write_histogram(&panel, run)
}

/// Totals per duration over every panel day.
fn write_histogram(panel: &CellPanel, run: &mut Run) -> Result<()> {
    let rows: Vec<HistogramRow> = panel
        .durations()
        .iter()
        .map(|i| {
            let (mut n, mut h) = (0u64, 0u64);
            for d in 0..panel.n_days() {
                n += panel.group_size(i, d) as u64;
                h += panel.hires(i, d) as u64;
            }
            HistogramRow {
                duration: i,
                group_size: n,
                hires: h,
                share: (n > 0).then(|| h as f64 / n as f64),
            }
        })
        .collect();
    let spec = PlotSpec {
        title: "Non-employed workers and hires by duration".into(),
        kind: "bar",
        data: String::new(),
        x: Axis::new("duration", "days since the end of the last contract"),
        y: vec![Axis::new("group_size", "worker-days"), Axis::new("hires", "hires")],
        markers: vec![Marker {
            axis: "x",
            value: json!(THRESHOLD_DAYS),
            label: "eligibility threshold".into(),
        }],
    };
    run.write_plot("duration_histogram", &rows, spec)
}
