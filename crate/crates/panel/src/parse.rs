use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::records::ContractRecord;
use super::PanelError;

pub const REQUIRED_COLUMNS: [&str; 11] = [
    "worker_id",
    "firm_id",
    "start_date",
    "end_date",
    "contract_type",
    "region",
    "sector",
    "sex",
    "education",
    "first_job_age",
    "foreign",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatDescriptor {
    pub delimiter: u8,
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub reason: String,
}

/// Parses delimiter-separated contract records.
///
/// Column order is free; extra columns are ignored. Malformed rows are skipped
/// and reported, never dropped silently.
pub fn parse_contracts<R: Read>(
    input: R,
    format: &FormatDescriptor,
) -> Result<(Vec<ContractRecord>, Vec<ParseDiagnostic>), PanelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(input);

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(PanelError::EmptyFile);
    }
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut cols = [0usize; REQUIRED_COLUMNS.len()];
    for (slot, name) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| PanelError::MissingColumn(name.to_string()))?;
    }

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                diagnostics.push(ParseDiagnostic {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        match parse_row(&row, &cols) {
            Ok(rec) => records.push(rec),
            Err(reason) => diagnostics.push(ParseDiagnostic { line, reason }),
        }
    }
    Ok((records, diagnostics))
}

fn parse_row(row: &csv::StringRecord, cols: &[usize; 11]) -> Result<ContractRecord, String> {
    let field = |k: usize| -> Result<&str, String> {
        row.get(cols[k])
            .map(str::trim)
            .ok_or_else(|| format!("missing field {}", REQUIRED_COLUMNS[k]))
    };
    let date = |k: usize| -> Result<NaiveDate, String> {
        let s = field(k)?;
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("{}: {s:?}: {e}", REQUIRED_COLUMNS[k]))
    };
    let token = |k: usize| -> Result<&str, String> {
        let s = field(k)?;
        if s.is_empty() {
            Err(format!("empty {}", REQUIRED_COLUMNS[k]))
        } else {
            Ok(s)
        }
    };

    let worker_id = token(0)?.to_string();
    let firm_id = token(1)?.to_string();
    let start_date = date(2)?;
    let end_date = if field(3)?.is_empty() { None } else { Some(date(3)?) };
    if let Some(end) = end_date {
        if end < start_date {
            return Err(format!("end_date {end} precedes start_date {start_date}"));
        }
    }
    let foreign = match field(10)?.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => true,
        "false" | "0" | "no" => false,
        other => return Err(format!("foreign: expected a boolean, found {other:?}")),
    };
    Ok(ContractRecord {
        worker_id,
        firm_id,
        start_date,
        end_date,
        contract_type: field(4)?.parse().map_err(|e| format!("{e}"))?,
        region: field(5)?.parse().map_err(|e| format!("{e}"))?,
        sector: field(6)?.parse().map_err(|e| format!("{e}"))?,
        sex: field(7)?.parse().map_err(|e| format!("{e}"))?,
        education: field(8)?.parse().map_err(|e| format!("{e}"))?,
        first_job_age: field(9)?.parse().map_err(|e| format!("{e}"))?,
        foreign,
    })
}

/// Writes records in the format [`parse_contracts`] reads.
pub fn emit_contracts<W: Write>(
    out: W,
    records: &[ContractRecord],
    format: &FormatDescriptor,
) -> Result<(), PanelError> {
    let mut wtr = csv::WriterBuilder::new().delimiter(format.delimiter).from_writer(out);
    wtr.write_record(REQUIRED_COLUMNS)?;
    for r in records {
        let start = r.start_date.to_string();
        let end = r.end_date.map(|d| d.to_string()).unwrap_or_default();
        wtr.write_record([
            r.worker_id.as_str(),
            r.firm_id.as_str(),
            start.as_str(),
            end.as_str(),
            r.contract_type.as_str(),
            r.region.as_str(),
            r.sector.as_str(),
            r.sex.as_str(),
            r.education.as_str(),
            r.first_job_age.as_str(),
            if r.foreign { "true" } else { "false" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
