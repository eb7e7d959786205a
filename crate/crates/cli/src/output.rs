//! Artifact files: `results.json`, `tables/*.csv` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::runner::Table;
use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline; the exact bytes are hashed.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("results serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<(), CliError> {
    let tdir = dir.join("tables");
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    for t in tables {
        let path = tdir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(&t.header).map_err(|e| csv_err(&path, e))?;
        for row in &t.rows {
            w.write_record(row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub config_sha256: String,
    pub results_sha256: String,
    pub kernel_epsilon: f64,
    pub grid_spacing: Option<f64>,
    pub threads: usize,
    pub version: String,
    /// Seconds since the Unix epoch; not part of any hash.
    pub timestamp: u64,
}

impl Manifest {
    pub fn new(scenario: &str, config: &[u8], results: &[u8], epsilon: f64, spacing: Option<f64>) -> Self {
        Manifest {
            scenario: scenario.to_string(),
            config_sha256: sha256_hex(config),
            results_sha256: sha256_hex(results),
            kernel_epsilon: epsilon,
            grid_spacing: spacing,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Writes results and tables, then the manifest last.
pub fn write_run(
    dir: &Path,
    results_bytes: &[u8],
    tables: &[Table],
    manifest: &Manifest,
) -> Result<PathBuf, CliError> {
    let results_path = dir.join("results.json");
    write_bytes(&results_path, results_bytes)?;
    write_tables(dir, tables)?;
    write_bytes(&dir.join("manifest.json"), &to_json_bytes(manifest))?;
    Ok(results_path)
}
