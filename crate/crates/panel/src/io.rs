use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cells::{CellFilters, CellPanel, DurationRange};
use super::daily::DailySeries;
use super::records::{Covariate, N_COVARIATES};
use super::PanelError;
use ltu_core::dates::DateRange;

/// Sidecar describing how a cell file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub days: DateRange,
    pub durations: DurationRange,
    pub filters: CellFilters,
    pub track_covariates: bool,
    pub n_records: usize,
    pub n_parse_diagnostics: usize,
    pub n_workers: usize,
    pub n_spells: usize,
    pub n_cells: usize,
    pub n_empty_cells: usize,
    pub out_of_range_total: u64,
}

const CELL_COLUMNS: [&str; 5] = ["i", "j", "group_size", "hires", "share"];

/// Writes one row per cell, day-major. Shares of empty cells are left blank.
pub fn write_cells_csv<W: Write>(out: W, panel: &CellPanel) -> Result<(), PanelError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CELL_COLUMNS.to_vec();
    if panel.has_covariates() {
        header.extend(Covariate::ALL.iter().map(|c| c.as_str()));
    }
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for cell in panel.cells() {
        row.clear();
        row.push(cell.duration.to_string());
        row.push(cell.day.to_string());
        row.push(cell.group_size.to_string());
        row.push(cell.hires.to_string());
        row.push(cell.share().map(|s| s.to_string()).unwrap_or_default());
        if panel.has_covariates() {
            match &cell.covariate_shares {
                Some(v) => row.extend(v.iter().map(|s| s.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), N_COVARIATES)),
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a file written by [`write_cells_csv`]. Covariate counts are
/// recovered as `round(share × group_size)`; the out-of-range remainder is
/// not stored and reads back as zero.
pub fn read_cells_csv<R: Read>(input: R, filters: CellFilters) -> Result<CellPanel, PanelError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let pos: HashMap<&str, usize> = headers.iter().enumerate().map(|(k, h)| (h.trim(), k)).collect();
    let col = |name: &str| pos.get(name).copied().ok_or_else(|| PanelError::MissingColumn(name.to_string()));
    let (ci, cj, cn, ch) = (col("i")?, col("j")?, col("group_size")?, col("hires")?);
    let cov_cols: Option<Vec<usize>> = Covariate::ALL.iter().map(|c| pos.get(c.as_str()).copied()).collect();

    struct Row {
        i: u32,
        j: NaiveDate,
        n: u32,
        h: u32,
        cov: Option<[u32; N_COVARIATES]>,
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| PanelError::MalformedCells { line, reason };
        let get = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
        let i: u32 = get(ci).parse().map_err(|e| bad(format!("i: {e}")))?;
        let j = NaiveDate::parse_from_str(get(cj), "%Y-%m-%d").map_err(|e| bad(format!("j: {e}")))?;
        let n: u32 = get(cn).parse().map_err(|e| bad(format!("group_size: {e}")))?;
        let h: u32 = get(ch).parse().map_err(|e| bad(format!("hires: {e}")))?;
        let cov = match &cov_cols {
            Some(cols) => {
                let mut counts = [0u32; N_COVARIATES];
                if n > 0 {
                    for (slot, &k) in counts.iter_mut().zip(cols) {
                        let s: f64 = get(k).parse().map_err(|e| bad(format!("share: {e}")))?;
                        *slot = (s * n as f64).round() as u32;
                    }
                }
                Some(counts)
            }
            None => None,
        };
        rows.push(Row { i, j, n, h, cov });
    }
    if rows.is_empty() {
        return Err(PanelError::EmptyFile);
    }

    let i_lo = rows.iter().map(|r| r.i).min().unwrap_or(0);
    let i_hi = rows.iter().map(|r| r.i).max().unwrap_or(0);
    let j_lo = rows.iter().map(|r| r.j).min().expect("nonempty");
    let j_hi = rows.iter().map(|r| r.j).max().expect("nonempty");
    let durations = DurationRange::new(i_lo, i_hi)
        .ok_or_else(|| PanelError::MalformedCells { line: 0, reason: "durations must start at 1 or above".into() })?;
    let days = DateRange::new(j_lo, j_hi).expect("min <= max");
    let n_dur = durations.len();
    let n = n_dur * days.len();
    if rows.len() != n {
        return Err(PanelError::MalformedCells {
            line: 0,
            reason: format!("expected {n} cells for a full grid, found {}", rows.len()),
        });
    }
    let mut seen = vec![false; n];
    let mut group_size = vec![0; n];
    let mut hires = vec![0; n];
    let mut covariates = cov_cols.as_ref().map(|_| vec![0u32; n * N_COVARIATES]);
    for r in rows {
        let k = days.offset(r.j).expect("inside range") * n_dur + (r.i - i_lo) as usize;
        if std::mem::replace(&mut seen[k], true) {
            return Err(PanelError::MalformedCells {
                line: 0,
                reason: format!("duplicate cell ({}, {})", r.i, r.j),
            });
        }
        group_size[k] = r.n;
        hires[k] = r.h;
        if let (Some(dst), Some(src)) = (covariates.as_mut(), r.cov) {
            dst[k * N_COVARIATES..(k + 1) * N_COVARIATES].copy_from_slice(&src);
        }
    }
    CellPanel::from_counts(days, durations, group_size, hires, covariates, filters)
}

pub fn write_daily_csv<W: Write>(out: W, series: &DailySeries) -> Result<(), PanelError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["day", "y", "group_size", "hires"])?;
    for k in 0..series.len() {
        wtr.write_record([
            series.days[k].to_string(),
            series.y[k].to_string(),
            series.group_size[k].to_string(),
            series.hires[k].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `day,y[,group_size,hires]` file; `window` is recorded as metadata.
pub fn read_daily_csv<R: Read>(input: R, window: DurationRange) -> Result<DailySeries, PanelError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let pos: HashMap<&str, usize> = headers.iter().enumerate().map(|(k, h)| (h.trim(), k)).collect();
    let cd = *pos.get("day").ok_or_else(|| PanelError::MissingColumn("day".into()))?;
    let cy = *pos.get("y").ok_or_else(|| PanelError::MissingColumn("y".into()))?;
    let (cn, ch) = (pos.get("group_size").copied(), pos.get("hires").copied());
    let mut s = DailySeries {
        window,
        days: Vec::new(),
        y: Vec::new(),
        group_size: Vec::new(),
        hires: Vec::new(),
        empty_days: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| PanelError::MalformedCells { line, reason };
        let get = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
        let day = NaiveDate::parse_from_str(get(cd), "%Y-%m-%d").map_err(|e| bad(format!("day: {e}")))?;
        if s.days.last().is_some_and(|&prev| prev >= day) {
            return Err(bad("days must be strictly increasing".into()));
        }
        s.days.push(day);
        s.y.push(get(cy).parse().map_err(|e| bad(format!("y: {e}")))?);
        s.group_size
            .push(cn.map_or(Ok(0), |k| get(k).parse()).map_err(|e| bad(format!("group_size: {e}")))?);
        s.hires
            .push(ch.map_or(Ok(0), |k| get(k).parse()).map_err(|e| bad(format!("hires: {e}")))?);
    }
    if s.days.is_empty() {
        return Err(PanelError::EmptyFile);
    }
    Ok(s)
}
