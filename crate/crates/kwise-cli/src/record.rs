//! Run artifacts: a versioned JSON record or a flat CSV table.
//!
//! The JSON form carries the full configuration, a SHA-256 of its
//! canonical serialization, per-trial rows, and aggregates.  Wall-clock
//! time appears only in the JSON form: CSV output is a pure function of
//! configuration and seed, so identical invocations produce identical
//! bytes.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA: &str = "kwise-run/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Versioned envelope for a JSON run artifact.
#[derive(Serialize)]
pub struct RunRecord<C: Serialize, T: Serialize, A: Serialize> {
    pub schema: &'static str,
    pub artifact_version: &'static str,
    pub command: &'static str,
    pub config: C,
    /// SHA-256 over the canonical JSON serialization of `config`.
    pub config_sha256: String,
    pub trials: Vec<T>,
    pub aggregates: A,
    /// Milliseconds of wall clock; excluded from the CSV form so that
    /// reruns are byte-identical.
    pub wall_ms: u128,
}

pub fn config_sha256<C: Serialize>(config: &C) -> Result<String, CliError> {
    let canonical = serde_json::to_vec(config)
        .map_err(|e| CliError::Internal(format!("config serialization failed: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(&canonical);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Where output goes: `--out PATH` or stdout.
pub struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> Self {
        Sink { out }
    }

    pub fn write_bytes(&self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, bytes)
                .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(bytes)
                    .and_then(|()| stdout.flush())
                    .map_err(|e| CliError::Internal(format!("writing stdout: {e}")))
            }
        }
    }

    pub fn write_json<R: Serialize>(&self, record: &R) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(record)
            .map_err(|e| CliError::Internal(format!("serializing record: {e}")))?;
        text.push('\n');
        self.write_bytes(text.as_bytes())
    }

    /// Serializes `rows` (any one `Serialize` row type) with a header.
    pub fn write_csv<R: Serialize>(&self, rows: &[R]) -> Result<(), CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in rows {
            writer
                .serialize(row)
                .map_err(|e| CliError::Internal(format!("serializing CSV row: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::Internal(format!("flushing CSV: {e}")))?;
        self.write_bytes(&bytes)
    }
}
