//! Provenance stamps, output files and machine-readable errors.

use std::fmt;
use std::path::{Path, PathBuf};

use lqt_core::bench::Table;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    Core(lqt_core::Error),
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
        }
    }
}

impl From<lqt_core::Error> for CliError {
    fn from(e: lqt_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Tool version, seed and a digest of everything that determines the output.
/// Paths, the output directory and the worker count are left out of the
/// digest; the contents of input files go in instead.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, config: &C, seed: Option<u64>, inputs: &[&Path]) -> CliResult<Self> {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(serde_json::to_vec(config)?);
        for path in inputs {
            let bytes = std::fs::read(path).map_err(io_err(path))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(Provenance {
            tool: "lqt",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash: hex::encode(h.finalize()),
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("plain struct")
    }

    pub fn csv_header(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), self.tool.into()),
            ("version".into(), self.version.into()),
            ("command".into(), self.command.into()),
            ("seed".into(), self.seed.map_or("none".into(), |s| s.to_string())),
            ("config_hash".into(), self.config_hash.clone()),
        ]
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes pretty JSON with the provenance object under `provenance`.
pub fn write_json(path: &Path, prov: &Provenance, mut body: Value) -> CliResult<()> {
    body["provenance"] = prov.to_json();
    let text = serde_json::to_string_pretty(&body)? + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_table(path: &Path, prov: &Provenance, table: &Table) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut out = std::io::BufWriter::new(file);
    table.write_csv(&mut out, &prov.csv_header()).map_err(io_err(path))?;
    std::io::Write::flush(&mut out).map_err(io_err(path))
}
