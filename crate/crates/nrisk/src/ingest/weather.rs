//! Live surface-pressure feed.
//!
//! Network interaction sits behind the [`WeatherProvider`] contract — a
//! request for (lat, lon) returning the provider's raw JSON observation — so
//! tests substitute a canned responder and the rest of the pipeline never
//! sees a socket. [`fetch_current_pressure`] retries transport failures with
//! exponential backoff, maps the payload to a [`PressureSample`] and flags
//! stale observations.
//!
//! The reference payload mapping for a generic JSON forecast API:
//!
//! - `pressure_msl` (hPa) → kind `mean_sea_level`, or
//!   `surface_pressure` / `pressure_station` (hPa) → kind `station`;
//! - `time` → RFC 3339 string or unix seconds;
//! - anything else is ignored.

use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

use super::pressure::{PressureKind, PressureSample, SAMPLE_RANGE_HPA};

/// Observations older than this are flagged stale (warning, not error).
pub const STALENESS_LIMIT_S: i64 = 3 * 3600;

/// Transport-level failure reported by a provider.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// The provider contract: one current observation for a coordinate.
pub trait WeatherProvider {
    fn observe(&self, lat_deg: f64, lon_deg: f64) -> Result<Value, TransportError>;

    /// Identity recorded in the resulting sample's `source` field.
    fn name(&self) -> &str {
        "weather"
    }
}

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("transport failed after {attempts} attempt(s): {last}")]
    Transport { attempts: u32, last: String },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("observed pressure {0} hPa outside ({}, {}) hPa", SAMPLE_RANGE_HPA.0, SAMPLE_RANGE_HPA.1)]
    PressureOutOfRange(f64),
}

/// Retry schedule for transport failures: `attempts` tries with delays
/// `base_delay * 2^k` between them.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// A mapped observation plus its staleness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchedPressure {
    pub sample: PressureSample,
    /// Set when the observation is older than [`STALENESS_LIMIT_S`]
    /// relative to `now`.
    pub stale: bool,
}

/// Fetch the most recent surface observation for a coordinate.
///
/// `now_s` is the caller's clock (UTC seconds), used only for the staleness
/// flag.
pub fn fetch_current_pressure(
    provider: &dyn WeatherProvider,
    lat_deg: f64,
    lon_deg: f64,
    policy: &RetryPolicy,
    now_s: i64,
) -> Result<FetchedPressure, WeatherError> {
    let attempts = policy.attempts.max(1);
    let mut last_error = String::new();
    let mut payload = None;
    for attempt in 0..attempts {
        match provider.observe(lat_deg, lon_deg) {
            Ok(value) => {
                payload = Some(value);
                break;
            }
            Err(TransportError(message)) => {
                last_error = message;
                if attempt + 1 < attempts {
                    std::thread::sleep(policy.base_delay * 2u32.pow(attempt));
                }
            }
        }
    }
    let payload = payload.ok_or(WeatherError::Transport {
        attempts,
        last: last_error,
    })?;

    let (pressure_hpa, kind) = extract_pressure(&payload)?;
    let (lo, hi) = SAMPLE_RANGE_HPA;
    if !(pressure_hpa > lo && pressure_hpa < hi) {
        return Err(WeatherError::PressureOutOfRange(pressure_hpa));
    }
    let timestamp_s = extract_time(&payload)?;
    Ok(FetchedPressure {
        sample: PressureSample {
            timestamp_s,
            pressure_hpa,
            kind,
            source: provider.name().to_string(),
        },
        stale: now_s - timestamp_s > STALENESS_LIMIT_S,
    })
}

fn extract_pressure(payload: &Value) -> Result<(f64, PressureKind), WeatherError> {
    const FIELDS: [(&str, PressureKind); 3] = [
        ("pressure_msl", PressureKind::MeanSeaLevel),
        ("surface_pressure", PressureKind::Station),
        ("pressure_station", PressureKind::Station),
    ];
    for (field, kind) in FIELDS {
        if let Some(v) = payload.get(field) {
            let p = v.as_f64().ok_or_else(|| {
                WeatherError::MalformedPayload(format!("{field} is not a number: {v}"))
            })?;
            return Ok((p, kind));
        }
    }
    Err(WeatherError::MalformedPayload(
        "no pressure field (pressure_msl | surface_pressure | pressure_station)".to_string(),
    ))
}

fn extract_time(payload: &Value) -> Result<i64, WeatherError> {
    let time = payload
        .get("time")
        .ok_or_else(|| WeatherError::MalformedPayload("no time field".to_string()))?;
    match time {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().map(|f| f as i64))
            .ok_or_else(|| WeatherError::MalformedPayload(format!("bad time number: {n}"))),
        Value::String(s) => chrono::DateTime::parse_from_rfc3339(s)
            .map(|t| t.timestamp())
            .map_err(|e| WeatherError::MalformedPayload(format!("bad time string {s:?}: {e}"))),
        other => Err(WeatherError::MalformedPayload(format!(
            "unsupported time value: {other}"
        ))),
    }
}

/// HTTP provider for a generic JSON forecast API.
///
/// Configured via `NRISK_WEATHER_URL` (endpoint) and `NRISK_WEATHER_KEY`
/// (credential, optional); issues `GET {url}?lat={lat}&lon={lon}[&key=...]`.
pub struct HttpWeatherClient {
    url: String,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpWeatherClient {
    pub const URL_ENV: &'static str = "NRISK_WEATHER_URL";
    pub const KEY_ENV: &'static str = "NRISK_WEATHER_KEY";

    pub fn new(url: impl Into<String>, key: Option<String>) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpWeatherClient {
            url: url.into(),
            key,
            client,
        })
    }

    pub fn from_env() -> Result<Self, TransportError> {
        let url = std::env::var(Self::URL_ENV)
            .map_err(|_| TransportError(format!("{} not set", Self::URL_ENV)))?;
        let key = std::env::var(Self::KEY_ENV).ok();
        HttpWeatherClient::new(url, key)
    }
}

impl WeatherProvider for HttpWeatherClient {
    fn observe(&self, lat_deg: f64, lon_deg: f64) -> Result<Value, TransportError> {
        let mut request = self
            .client
            .get(&self.url)
            .query(&[("lat", lat_deg), ("lon", lon_deg)]);
        if let Some(key) = &self.key {
            request = request.query(&[("key", key.as_str())]);
        }
        let response = request.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError(format!("HTTP status {status}")));
        }
        response.json().map_err(|e| TransportError(e.to_string()))
    }

    fn name(&self) -> &str {
        "http"
    }
}
