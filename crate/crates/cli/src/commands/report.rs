use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::EstimateRow;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{sha256_file, FileDigest, Run, MANIFEST_FILE};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directories of earlier runs (repeatable).
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
}

impl ReportArgs {
    pub fn apply(&self, _cfg: &mut RunConfig) {}
}

#[derive(Deserialize)]
struct ManifestView {
    command: String,
    status: String,
    outputs: Vec<FileDigest>,
}

#[derive(Serialize)]
struct FileRow {
    run: String,
    command: String,
    status: String,
    path: String,
    sha256: String,
    verified: bool,
}

#[derive(Serialize)]
struct EstimateLine {
    run: String,
    command: String,
    table: String,
    label: String,
    tag: String,
    cell: String,
    estimate: Option<f64>,
    se: Option<f64>,
    p_value: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    n_obs: Option<usize>,
    error: Option<String>,
}

/// Checks every recorded output against its digest and gathers the estimate
/// tables of the runs into one.
pub fn run_report(args: &ReportArgs, _cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let mut files = Vec::new();
    let mut estimates = Vec::new();
    for dir in &args.runs {
        let path = dir.join(MANIFEST_FILE);
        let m: ManifestView = serde_json::from_reader(run.open_input(&path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let label = dir.display().to_string();
        for out in &m.outputs {
            let verified = sha256_file(&out.path).is_ok_and(|d| d.sha256 == out.sha256);
            files.push(FileRow {
                run: label.clone(),
                command: m.command.clone(),
                status: m.status.clone(),
                path: out.path.display().to_string(),
                sha256: out.sha256.clone(),
                verified,
            });
            let name = file_name(&out.path);
            if let Some(table) = name.strip_suffix("_estimates.json") {
                let rows: Vec<EstimateRow> = serde_json::from_reader(run.open_input(&out.path)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", out.path.display())))?;
                estimates.extend(rows.into_iter().map(|row| EstimateLine {
                    run: label.clone(),
                    command: m.command.clone(),
                    table: table.to_string(),
                    label: row.label,
                    tag: row.tag,
                    cell: row.cell,
                    estimate: row.estimate,
                    se: row.se,
                    p_value: row.p_value,
                    ci_lo: row.ci_lo,
                    ci_hi: row.ci_hi,
                    n_obs: row.n_obs,
                    error: row.error,
                }));
            }
        }
    }
    run.write_table("report_files", &files)?;
    run.write_table("report_estimates", &estimates)?;
    let failed = files.iter().filter(|f| !f.verified).count();
    if failed > 0 {
        return Err(CliError::Module {
            module: "cli",
            message: format!("{failed} recorded outputs no longer match their digests"),
        });
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
