//! Run configuration: built-in defaults, then the TOML file, then flags.

use std::path::Path;

use ltu_core::dates::{ymd, DateRange};
use ltu_panel::{ContractType, DurationRange, RegionFilter};
use ltu_rdd::{BalanceConfig, BatteryConfig, DurationSpec, TimeBatteryConfig, TimeSpec, WelchConfig};
use ltu_subsidy::SubsidyRates;
use ltu_synth::montecarlo::{BandwidthStudy, EstimatorStudy, IndirectStudy};
use ltu_synth::panel_dgp::PanelDgpConfig;
use ltu_synth::DgpConfig;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{CliError, Result};

pub const CONFIG_ENV: &str = "LTU_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub delimiter: char,
    pub days: DateRange,
    pub durations: DurationRange,
    pub regions: RegionFilter,
    /// Contract types counted as hires; empty counts every type.
    pub hire_types: Vec<ContractType>,
    pub track_covariates: bool,
    pub parasubordinate_ends_spell: bool,
    /// Days and duration window of the collapsed daily series.
    pub daily_days: DateRange,
    pub daily_window: DurationRange,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            delimiter: ',',
            days: DateRange::years(2010, 2015),
            durations: DurationRange { lo: 365, hi: 760 },
            regions: RegionFilter::All,
            hire_types: Vec::new(),
            track_covariates: true,
            parasubordinate_ends_spell: true,
            daily_days: DateRange::years(2010, 2015),
            daily_window: DurationRange { lo: 714, hi: 744 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthConfig {
    pub balance: BalanceConfig,
    pub max_half_width: u32,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            balance: BalanceConfig::default(),
            max_half_width: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndirectConfig {
    pub welch: WelchConfig,
    pub before: DateRange,
    pub after: DateRange,
    /// Kernel bandwidth of the smoothed curve; Silverman's rule when absent.
    pub smoothing_bandwidth: Option<f64>,
}

impl Default for IndirectConfig {
    fn default() -> Self {
        let (before, after) = ltu_rdd::indirect::default_periods();
        Self {
            welch: WelchConfig::default(),
            before,
            after,
            smoothing_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsidyConfig {
    pub rates: SubsidyRates,
    /// Years compared when reading per-hire records; empty means all.
    pub years: Vec<i32>,
}

impl Default for SubsidyConfig {
    fn default() -> Self {
        Self {
            rates: SubsidyRates::default(),
            years: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub dgp: DgpConfig,
    /// Hires written for the subsidy comparison fall in this period.
    pub hires_period: DateRange,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            hires_period: DateRange {
                start: ymd(2010, 1, 1),
                end: ymd(2015, 12, 31),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub dgp: DgpConfig,
    pub estimators: EstimatorStudy,
    pub bandwidth_panel: PanelDgpConfig,
    pub bandwidth: BandwidthStudy,
    pub indirect_panel: PanelDgpConfig,
    pub indirect: IndirectStudy,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig {
                entries_per_day: 1_000.0,
                ..DgpConfig::default()
            },
            estimators: EstimatorStudy::default(),
            bandwidth_panel: PanelDgpConfig::balance_design(),
            bandwidth: BandwidthStudy::default(),
            indirect_panel: PanelDgpConfig::displacement_design(),
            indirect: IndirectStudy::default(),
        }
    }
}

/// Everything a run can be configured with. Each subcommand reads its own
/// sections; the whole resolved value goes into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub ingest: IngestConfig,
    pub bandwidth: BandwidthConfig,
    pub duration: DurationSpec,
    pub battery: BatteryConfig,
    pub time: TimeSpec,
    pub time_battery: TimeBatteryConfig,
    pub indirect: IndirectConfig,
    pub subsidy: SubsidyConfig,
    pub simulate: SimulateConfig,
    pub monte_carlo: MonteCarloConfig,
}

impl RunConfig {
    /// Defaults overlaid with the file at `path`, then with `overrides`
    /// (`dotted.key=value` pairs, values in TOML syntax or bare strings).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut merged = Value::try_from(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(path) = path {
            if !path.exists() {
                return Err(CliError::InputNotFound(path.to_path_buf()));
            }
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let file: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
            overlay(&mut merged, Value::Table(file));
        }
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            set_path(&mut merged, key.trim(), parse_scalar(value.trim()))?;
        }
        merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration serialises")
    }
}

fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Recursive table merge. A table holding a single key that the overlay does
/// not mention is an enum variant and gets replaced rather than merged.
fn overlay(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            let replaces_variant = b.len() == 1 && !o.is_empty() && o.keys().all(|k| !b.contains_key(k));
            if replaces_variant {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in {key:?}")))?;
    let mut node = root;
    for p in parts {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {p} is not a table")))?;
        node = table.entry(p).or_insert_with(|| Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("{key}: parent is not a table")))?;
    match table.get_mut(last) {
        Some(slot) => overlay(slot, value),
        None => {
            table.insert(last.to_string(), value);
        }
    }
    Ok(())
}

/// `a:b` with both ends parsed by `f`.
pub fn parse_pair<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<(T, T)> {
    let (a, b) = s.split_once(':')?;
    Some((f(a.trim())?, f(b.trim())?))
}

pub fn parse_durations(s: &str) -> std::result::Result<DurationRange, String> {
    parse_pair(s, |x| x.parse().ok())
        .and_then(|(lo, hi)| DurationRange::new(lo, hi))
        .ok_or_else(|| format!("expected lo:hi with lo <= hi, got {s:?}"))
}

pub fn parse_days(s: &str) -> std::result::Result<DateRange, String> {
    parse_pair(s, |x| chrono::NaiveDate::parse_from_str(x, "%Y-%m-%d").ok())
        .and_then(|(a, b)| DateRange::new(a, b))
        .ok_or_else(|| format!("expected YYYY-MM-DD:YYYY-MM-DD in order, got {s:?}"))
}

pub fn parse_month(s: &str) -> std::result::Result<(i32, u32), String> {
    let bad = || format!("expected YYYY-MM, got {s:?}");
    let (y, m) = s.split_once('-').ok_or_else(bad)?;
    let y: i32 = y.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) {
        return Err(bad());
    }
    Ok((y, m))
}
