//! Output files, digests and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, ErrorReport, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub status: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_secs: f64,
    pub threads: usize,
    pub library_version: &'static str,
    pub error: Option<ErrorReport>,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest> {
    let mut f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::InputNotFound(path.to_path_buf()),
        _ => CliError::io(path)(e),
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(CliError::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: hex(&hasher.finalize()),
        bytes,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Axis of a plot sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub column: String,
    pub label: String,
}

impl Axis {
    pub fn new(column: &str, label: &str) -> Self {
        Self {
            column: column.into(),
            label: label.into(),
        }
    }
}

/// Vertical or horizontal reference line.
#[derive(Debug, Clone, Serialize)]
pub struct Marker {
    pub axis: &'static str,
    pub value: serde_json::Value,
    pub label: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotSpec {
    pub title: String,
    pub kind: &'static str,
    pub data: String,
    pub x: Axis,
    pub y: Vec<Axis>,
    pub markers: Vec<Marker>,
}

/// Collects the inputs read and the files written by one run.
pub struct Run {
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Opens an input, recording its digest first.
    pub fn open_input(&mut self, path: &Path) -> Result<File> {
        let digest = sha256_file(path)?;
        self.inputs.push(digest);
        File::open(path).map_err(CliError::io(path))
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(CliError::io(&path))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Config(e.to_string()))?;
            w.write_all(b"\n").map_err(CliError::io(Path::new(name)))
        })?;
        Ok(())
    }

    fn write_csv<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        self.write_with(&format!("{stem}.csv"), |w| {
            let mut wtr = csv::Writer::from_writer(w);
            for r in rows {
                wtr.serialize(r).map_err(|e| csv_error(stem, e))?;
            }
            wtr.flush().map_err(CliError::io(Path::new(stem)))
        })?;
        Ok(())
    }

    /// Writes `rows` as `<stem>.csv` and `<stem>.json`.
    pub fn write_table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        self.write_csv(stem, rows)?;
        self.write_json(&format!("{stem}.json"), &rows)?;
        Ok(())
    }

    /// Writes the plot data table plus a `<stem>.plot.json` sidecar.
    pub fn write_plot<T: Serialize>(&mut self, stem: &str, rows: &[T], mut spec: PlotSpec) -> Result<()> {
        self.write_csv(stem, rows)?;
        spec.data = format!("{stem}.csv");
        self.write_json(&format!("{stem}.plot.json"), &spec)?;
        Ok(())
    }

    /// Writes the manifest; every output is digested after the fact.
    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        threads: usize,
        wall_time_secs: f64,
        error: Option<ErrorReport>,
    ) -> Result<PathBuf> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| sha256_file(p))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            status: if error.is_none() { "ok" } else { "error" },
            config,
            inputs: self.inputs,
            outputs,
            wall_time_secs,
            threads,
            library_version: env!("CARGO_PKG_VERSION"),
            error,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
        Ok(path)
    }
}

fn csv_error(stem: &str, e: csv::Error) -> CliError {
    CliError::Module {
        module: "cli",
        message: format!("{stem}.csv: {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        let d = sha256_file(&p).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
        assert!(matches!(sha256_file(&dir.path().join("missing")), Err(CliError::InputNotFound(_))));
    }
}
