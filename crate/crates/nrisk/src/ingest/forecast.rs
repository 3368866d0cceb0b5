//! Append-only forecast log.
//!
//! One JSON object per line, flushed and fsynced per append so a crash can
//! lose at most the line being written. The reader tolerates exactly that
//! failure mode: a partial trailing line is skipped with a warning flag;
//! corruption anywhere else is an error.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::EnergyBand;

#[derive(Debug, Error)]
pub enum ForecastLogError {
    #[error("log I/O failed on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("log corrupt at line {line} of {path}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One issued forecast, with enough provenance to reproduce it bit-exactly
/// from the same catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    /// UTC seconds of the observation the forecast was computed from.
    pub timestamp_s: i64,
    pub site_code: String,
    pub band: EnergyBand,
    /// Station-level pressure used for the prediction, hPa.
    pub pressure_hpa: f64,
    pub flux_m2h: f64,
    pub fit: f64,
    pub mtbf_hours: f64,
    /// Fingerprint of the catalog the coefficients came from.
    pub catalog_version: String,
    /// Crate version that produced the record.
    pub model_version: String,
}

/// Single-writer handle to an append-only log file.
pub struct ForecastLog {
    path: PathBuf,
    file: File,
}

impl ForecastLog {
    /// Open (creating if needed) a log for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<ForecastLog, ForecastLogError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| ForecastLogError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(ForecastLog { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record as a single line and sync it to disk.
    pub fn append(&mut self, record: &ForecastRecord) -> Result<(), ForecastLogError> {
        let io_err = |source| ForecastLogError::Io {
            path: self.path.clone(),
            source,
        };
        let mut json = serde_json::to_string(record).expect("record serialization cannot fail");
        json.push('\n');
        self.file.write_all(json.as_bytes()).map_err(io_err)?;
        self.file.sync_all().map_err(io_err)
    }
}

/// Result of replaying a log from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReplay {
    pub records: Vec<ForecastRecord>,
    /// True when a partial trailing line was detected and skipped.
    pub skipped_partial_tail: bool,
}

/// Read a forecast log back, skipping a crash-truncated final line.
///
/// A missing file reads as an empty log.
pub fn read_log(path: impl AsRef<Path>) -> Result<LogReplay, ForecastLogError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(LogReplay {
                records: Vec::new(),
                skipped_partial_tail: false,
            })
        }
        Err(source) => {
            return Err(ForecastLogError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut lines: Vec<String> = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|source| ForecastLogError::Io {
            path: path.to_path_buf(),
            source,
        })?);
    }
    let mut records = Vec::with_capacity(lines.len());
    let mut skipped_partial_tail = false;
    let last = lines.len();
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ForecastRecord>(line) {
            Ok(record) => records.push(record),
            Err(_) if idx + 1 == last => {
                // Torn final write: keep everything before it.
                skipped_partial_tail = true;
            }
            Err(e) => {
                return Err(ForecastLogError::Corrupt {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(LogReplay {
        records,
        skipped_partial_tail,
    })
}
