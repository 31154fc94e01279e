//! Report files and the run manifest. Everything is written from one place,
//! after the computation, in a fixed order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const REPORT: &str = "report.json";
pub const TABLE: &str = "table.csv";
pub const MANIFEST: &str = "manifest.json";

/// Fixed-point rendering for tables.
pub fn fixed(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        String::new()
    }
}

pub fn opt_fixed(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| fixed(v, decimals)).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(format!("table: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Config(format!("table: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub piic: String,
    pub piic_cli: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// SHA-256 of the resolved configuration as serialized below.
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub parallel: bool,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// `false` when the run finished with a numerical failure.
    pub success: bool,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, inputs: &[PathBuf]) -> CliResult<Self> {
        let canonical = serde_json::to_vec(config).map_err(|e| CliError::Config(format!("config: {e}")))?;
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                Ok(InputFile { path: p.display().to_string(), sha256: sha256_hex(&bytes) })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Manifest {
            command: command.to_string(),
            config_hash: sha256_hex(&canonical),
            seed: config.seed()?,
            versions: Versions { piic: piic::VERSION.to_string(), piic_cli: env!("CARGO_PKG_VERSION").to_string() },
            parallel: cfg!(feature = "parallel"),
            inputs,
            outputs: Vec::new(),
            success: true,
            config: config.clone(),
        })
    }
}

/// Serializes a value as pretty JSON with a trailing newline. Floats use the
/// shortest representation that parses back to the same value.
pub fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(format!("json: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Sole writer of the output directory.
pub struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Writer { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes the manifest last, listing every file written before it.
    pub fn finish(mut self, mut manifest: Manifest) -> CliResult<()> {
        manifest.outputs = self.written.clone();
        let bytes = to_json(&manifest)?;
        self.write(MANIFEST, &bytes)
    }
}
