//! Surface-pressure time series.
//!
//! Two line formats are accepted, freely mixed: CSV rows
//! `iso8601_utc,pressure_hpa,kind,source` and JSON objects
//! `{"time": "...", "pressure_hpa": ..., "kind": "...", "source": "..."}`.
//! `#` begins a comment. Timestamps must be strictly increasing.

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical window accepted for any single pressure sample, hPa.
pub const SAMPLE_RANGE_HPA: (f64, f64) = (300.0, 1100.0);

#[derive(Debug, Error)]
pub enum SeriesParseError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: pressure {pressure} hPa outside ({}, {}) hPa", SAMPLE_RANGE_HPA.0, SAMPLE_RANGE_HPA.1)]
    PressureOutOfRange { line: usize, pressure: f64 },
    #[error("line {line}: timestamp not strictly increasing (duplicate or out of order)")]
    NonMonotoneTimestamp { line: usize },
}

/// Whether a sample is a station-level or mean-sea-level observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureKind {
    Station,
    MeanSeaLevel,
}

impl PressureKind {
    pub fn parse(s: &str) -> Option<PressureKind> {
        match s.to_ascii_lowercase().as_str() {
            "station" => Some(PressureKind::Station),
            "msl" | "mean_sea_level" => Some(PressureKind::MeanSeaLevel),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PressureKind::Station => "station",
            PressureKind::MeanSeaLevel => "mean_sea_level",
        }
    }
}

/// One timestamped surface-pressure observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSample {
    /// UTC seconds since the epoch.
    pub timestamp_s: i64,
    pub pressure_hpa: f64,
    pub kind: PressureKind,
    pub source: String,
}

#[derive(Deserialize)]
struct JsonRow {
    time: String,
    pressure_hpa: f64,
    kind: PressureKind,
    source: String,
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(raw)
        .ok()
        .map(|t| t.with_timezone(&Utc).timestamp())
}

/// Parse a pressure-series document into validated, ordered samples.
pub fn parse_pressure_series(document: &str) -> Result<Vec<PressureSample>, SeriesParseError> {
    let mut out: Vec<PressureSample> = Vec::new();
    for (idx, raw) in document.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let sample = if trimmed.starts_with('{') {
            let row: JsonRow =
                serde_json::from_str(trimmed).map_err(|e| SeriesParseError::MalformedRow {
                    line,
                    message: e.to_string(),
                })?;
            let timestamp_s =
                parse_timestamp(&row.time).ok_or_else(|| SeriesParseError::MalformedRow {
                    line,
                    message: format!("cannot parse timestamp {:?}", row.time),
                })?;
            PressureSample {
                timestamp_s,
                pressure_hpa: row.pressure_hpa,
                kind: row.kind,
                source: row.source,
            }
        } else {
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(SeriesParseError::MalformedRow {
                    line,
                    message: format!(
                        "expected `iso8601_utc,pressure_hpa,kind,source`, got {trimmed:?}"
                    ),
                });
            }
            let timestamp_s =
                parse_timestamp(fields[0]).ok_or_else(|| SeriesParseError::MalformedRow {
                    line,
                    message: format!("cannot parse timestamp {:?}", fields[0]),
                })?;
            let pressure_hpa: f64 =
                fields[1]
                    .parse()
                    .map_err(|_| SeriesParseError::MalformedRow {
                        line,
                        message: format!("cannot parse pressure {:?}", fields[1]),
                    })?;
            let kind =
                PressureKind::parse(fields[2]).ok_or_else(|| SeriesParseError::MalformedRow {
                    line,
                    message: format!("unknown kind {:?} (station | mean_sea_level)", fields[2]),
                })?;
            PressureSample {
                timestamp_s,
                pressure_hpa,
                kind,
                source: fields[3].to_string(),
            }
        };

        let (lo, hi) = SAMPLE_RANGE_HPA;
        if !(sample.pressure_hpa > lo && sample.pressure_hpa < hi) {
            return Err(SeriesParseError::PressureOutOfRange {
                line,
                pressure: sample.pressure_hpa,
            });
        }
        if let Some(prev) = out.last() {
            if sample.timestamp_s <= prev.timestamp_s {
                return Err(SeriesParseError::NonMonotoneTimestamp { line });
            }
        }
        out.push(sample);
    }
    Ok(out)
}

/// Canonical CSV serialization (RFC 3339 timestamps with `Z`).
pub fn serialize_pressure_series(samples: &[PressureSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let ts = Utc
            .timestamp_opt(s.timestamp_s, 0)
            .single()
            .expect("valid epoch seconds")
            .to_rfc3339_opts(SecondsFormat::Secs, true);
        out.push_str(&format!(
            "{ts},{},{},{}\n",
            s.pressure_hpa,
            s.kind.as_str(),
            s.source
        ));
    }
    out
}
