//! Read-only HTTP API over the catalog and prediction pipeline, plus the
//! optional pressure-polling loop.
//!
//! Endpoints: `GET /healthz`, `GET /sites`, `GET /sites/{code}`,
//! `GET /flux?site&pressure&band`, `GET /risk?site&pressure&band&sigma&fleet&ckpt_cost`
//! and `GET /now/{code}` for the latest polled forecast. Handlers are thin
//! wrappers over the library calls and return their values unchanged; the
//! polling loop is the sole writer of the forecast log.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmosphere::LinsleyAtmosphere;
use crate::barometric::{self, BarometricError};
use crate::catalog::{CatalogError, EnergyBand, SiteCatalog};
use crate::ingest::pressure::PressureKind;
use crate::ingest::weather::{fetch_current_pressure, RetryPolicy, WeatherProvider};
use crate::ingest::{msl_to_station_pressure, ForecastLog, ForecastRecord};
use crate::reliability::{self, ReliabilityError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Service configuration. `poll_sites` left empty disables the live feed.
#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: String,
    pub poll_sites: Vec<String>,
    pub poll_interval: Duration,
    /// Live records older than this are served as 503. Defaults to three
    /// polling intervals.
    pub staleness_limit: Duration,
    pub log_path: Option<PathBuf>,
    /// Band used by the polling loop's forecasts.
    pub band: EnergyBand,
}

impl ServeConfig {
    pub fn new(bind: impl Into<String>) -> ServeConfig {
        let poll_interval = Duration::from_secs(15 * 60);
        ServeConfig {
            bind: bind.into(),
            poll_sites: Vec::new(),
            poll_interval,
            staleness_limit: poll_interval * 3,
            log_path: None,
            band: EnergyBand::Mid,
        }
    }
}

struct LiveEntry {
    record: ForecastRecord,
    received: Instant,
}

type LiveMap = Arc<RwLock<HashMap<String, LiveEntry>>>;

/// Shared state behind the handlers. The catalog is immutable; the live map
/// is written only by the polling loop.
#[derive(Clone)]
pub struct AppState {
    catalog: Arc<SiteCatalog>,
    live: LiveMap,
    live_configured: bool,
    staleness_limit: Duration,
}

impl AppState {
    pub fn new(
        catalog: Arc<SiteCatalog>,
        live_configured: bool,
        staleness_limit: Duration,
    ) -> AppState {
        AppState {
            catalog,
            live: Arc::new(RwLock::new(HashMap::new())),
            live_configured,
            staleness_limit,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

enum ApiError {
    NotFound(String),
    Domain(String),
    Unavailable(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::NotFound(e) => (StatusCode::NOT_FOUND, e),
            ApiError::Domain(e) => (StatusCode::BAD_REQUEST, e),
            ApiError::Unavailable(e) => (StatusCode::SERVICE_UNAVAILABLE, e),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> ApiError {
        match e {
            CatalogError::NotFound { .. } => ApiError::NotFound(e.to_string()),
            other => ApiError::Domain(other.to_string()),
        }
    }
}

impl From<BarometricError> for ApiError {
    fn from(e: BarometricError) -> ApiError {
        ApiError::Domain(e.to_string())
    }
}

impl From<ReliabilityError> for ApiError {
    fn from(e: ReliabilityError) -> ApiError {
        ApiError::Domain(e.to_string())
    }
}

fn parse_band(raw: Option<usize>, default: EnergyBand) -> Result<EnergyBand, ApiError> {
    match raw {
        None => Ok(default),
        Some(i) => EnergyBand::from_index(i)
            .ok_or_else(|| ApiError::Domain(format!("band must be 0, 1 or 2, got {i}"))),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn sites(State(state): State<AppState>) -> Json<Vec<crate::catalog::SiteRecord>> {
    Json(state.catalog.sites().to_vec())
}

async fn site_by_code(
    State(state): State<AppState>,
    Path(code): Path<String>,
) -> Result<Json<crate::catalog::SiteRecord>, ApiError> {
    Ok(Json(state.catalog.get(&code)?.clone()))
}

#[derive(Deserialize)]
struct FluxQuery {
    site: String,
    pressure: f64,
    band: Option<usize>,
}

async fn flux(
    State(state): State<AppState>,
    Query(q): Query<FluxQuery>,
) -> Result<Json<barometric::FluxPrediction>, ApiError> {
    let site = state.catalog.get(&q.site)?;
    let band = parse_band(q.band, EnergyBand::Full)?;
    Ok(Json(barometric::predict_flux(site, band, q.pressure)?))
}

#[derive(Deserialize)]
struct RiskQuery {
    site: String,
    pressure: f64,
    band: Option<usize>,
    sigma: Option<f64>,
    fleet: Option<u64>,
    ckpt_cost: Option<f64>,
}

async fn risk(
    State(state): State<AppState>,
    Query(q): Query<RiskQuery>,
) -> Result<Json<reliability::RiskReport>, ApiError> {
    let site = state.catalog.get(&q.site)?;
    // Defaults to the 50..1000 MeV band, which dominates the error rate.
    let band = parse_band(q.band, EnergyBand::Mid)?;
    let sensitivities = match q.sigma {
        Some(sigma) => vec![reliability::DeviceSensitivity::new(
            "user-device",
            reliability::ErrorKind::Sdc,
            sigma,
            0.0,
            "query parameter",
        )?],
        None => reliability::builtin_sensitivities(),
    };
    let report = reliability::risk_report(
        site,
        band,
        q.pressure,
        &sensitivities,
        q.fleet.unwrap_or(1),
        q.ckpt_cost,
    )?;
    Ok(Json(report))
}

async fn now(
    State(state): State<AppState>,
    Path(code): Path<String>,
) -> Result<Json<ForecastRecord>, ApiError> {
    let site = state.catalog.get(&code)?;
    if !state.live_configured {
        return Err(ApiError::Unavailable(
            "live feed not configured".to_string(),
        ));
    }
    let live = state.live.read().expect("live map lock");
    match live.get(&site.code) {
        Some(entry) if entry.received.elapsed() <= state.staleness_limit => {
            Ok(Json(entry.record.clone()))
        }
        Some(_) => Err(ApiError::Unavailable(format!(
            "live feed for {} is stale",
            site.code
        ))),
        None => Err(ApiError::Unavailable(format!(
            "no live observation for {} yet",
            site.code
        ))),
    }
}

/// Build the router over prepared state.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sites", get(sites))
        .route("/sites/:code", get(site_by_code))
        .route("/flux", get(flux))
        .route("/risk", get(risk))
        .route("/now/:code", get(now))
        .with_state(state)
}

/// Handle to a running polling loop.
pub struct PollerHandle {
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl PollerHandle {
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for PollerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

/// Start the polling loop: every interval, fetch the surface pressure for
/// each configured site, convert mean-sea-level observations to station
/// level through the standard atmosphere, run the prediction with the
/// built-in SDC cross-section and publish the record (and append it to the
/// log when one is configured).
pub fn spawn_poller(
    state: &AppState,
    provider: Arc<dyn WeatherProvider + Send + Sync>,
    config: &ServeConfig,
) -> PollerHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let catalog = Arc::clone(&state.catalog);
    let live = Arc::clone(&state.live);
    let sites = config.poll_sites.clone();
    let band = config.band;
    let interval = config.poll_interval;
    let log_path = config.log_path.clone();
    let model_version = env!("CARGO_PKG_VERSION").to_string();

    let thread = std::thread::spawn(move || {
        let sigma_sdc = reliability::builtin_sensitivities()
            .into_iter()
            .find(|s| s.error_kind == reliability::ErrorKind::Sdc)
            .expect("built-in SDC sensitivity")
            .sigma_cm2;
        let atmosphere = LinsleyAtmosphere::us_standard();
        let catalog_version = catalog.fingerprint();
        let mut log = log_path.and_then(|p| match ForecastLog::open(&p) {
            Ok(l) => Some(l),
            Err(e) => {
                eprintln!("forecast log disabled: {e}");
                None
            }
        });
        let policy = RetryPolicy::default();

        while !stop_flag.load(Ordering::SeqCst) {
            for code in &sites {
                let Ok(site) = catalog.get(code) else {
                    eprintln!("poller: unknown site {code}");
                    continue;
                };
                let now_s = chrono::Utc::now().timestamp();
                let fetched = match fetch_current_pressure(
                    provider.as_ref(),
                    site.latitude_deg,
                    site.longitude_deg,
                    &policy,
                    now_s,
                ) {
                    Ok(f) => f,
                    Err(e) => {
                        eprintln!("poller: {code}: {e}");
                        continue;
                    }
                };
                let station_hpa = match fetched.sample.kind {
                    PressureKind::Station => Ok(fetched.sample.pressure_hpa),
                    PressureKind::MeanSeaLevel => msl_to_station_pressure(
                        fetched.sample.pressure_hpa,
                        site.altitude_m,
                        &atmosphere,
                    )
                    .map_err(|e| e.to_string()),
                };
                let record = station_hpa
                    .map_err(|e| e.to_string())
                    .and_then(|p| {
                        barometric::predict_flux(site, band, p).map_err(|e| e.to_string())
                    })
                    .and_then(|prediction| {
                        let fit = reliability::fit_rate(prediction.flux_m2h, sigma_sdc)
                            .map_err(|e| e.to_string())?;
                        let mtbf = reliability::mtbf_hours(fit).map_err(|e| e.to_string())?;
                        Ok(ForecastRecord {
                            timestamp_s: fetched.sample.timestamp_s,
                            site_code: site.code.clone(),
                            band,
                            pressure_hpa: prediction.pressure_hpa,
                            flux_m2h: prediction.flux_m2h,
                            fit,
                            mtbf_hours: mtbf,
                            catalog_version: catalog_version.clone(),
                            model_version: model_version.clone(),
                        })
                    });
                match record {
                    Ok(record) => {
                        if let Some(log) = &mut log {
                            if let Err(e) = log.append(&record) {
                                eprintln!("poller: log append failed: {e}");
                            }
                        }
                        live.write().expect("live map lock").insert(
                            site.code.clone(),
                            LiveEntry {
                                record,
                                received: Instant::now(),
                            },
                        );
                    }
                    Err(e) => eprintln!("poller: {code}: {e}"),
                }
            }
            // Sleep in short slices so stop() stays responsive.
            let mut remaining = interval;
            while !stop_flag.load(Ordering::SeqCst) && remaining > Duration::ZERO {
                let slice = remaining.min(Duration::from_millis(50));
                std::thread::sleep(slice);
                remaining = remaining.saturating_sub(slice);
            }
        }
    });

    PollerHandle {
        stop,
        thread: Some(thread),
    }
}

/// Bind the configured address, start the poller when a provider is given,
/// and serve until the process ends. Returns the bound address through
/// `on_bound` before blocking.
pub async fn serve(
    catalog: Arc<SiteCatalog>,
    config: ServeConfig,
    provider: Option<Arc<dyn WeatherProvider + Send + Sync>>,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let live_configured = provider.is_some() && !config.poll_sites.is_empty();
    let state = AppState::new(
        Arc::clone(&catalog),
        live_configured,
        config.staleness_limit,
    );
    let _poller = match (&provider, live_configured) {
        (Some(p), true) => Some(spawn_poller(&state, Arc::clone(p), &config)),
        _ => None,
    };
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
