//! HTTP surface tests: endpoint behaviour, error mapping, bit-identity with
//! direct library calls, and the polling loop feeding `/now/{code}`.

use std::sync::Arc;
use std::time::Duration;

use nrisk::barometric::predict_flux;
use nrisk::catalog::{EnergyBand, SiteCatalog};
use nrisk::ingest::{read_log, TransportError, WeatherProvider};
use nrisk::service::{self, AppState, ServeConfig};
use serde_json::{json, Value};

struct CannedPressure(f64);

impl WeatherProvider for CannedPressure {
    fn observe(&self, _: f64, _: f64) -> Result<Value, TransportError> {
        Ok(json!({
            "surface_pressure": self.0,
            "time": chrono::Utc::now().timestamp(),
        }))
    }
    fn name(&self) -> &str {
        "canned"
    }
}

fn catalog() -> Arc<SiteCatalog> {
    Arc::new(SiteCatalog::builtin().clone())
}

/// Serve a state on an ephemeral port; returns the base URL.
async fn spawn_server(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, service::router(state)).await.unwrap();
    });
    format!("http://{addr}")
}

fn read_only_state() -> AppState {
    AppState::new(catalog(), false, Duration::from_secs(60))
}

async fn get(url: &str) -> (u16, Value) {
    let response = reqwest::get(url).await.unwrap();
    let status = response.status().as_u16();
    let body: Value = response.json().await.unwrap();
    (status, body)
}

#[tokio::test]
async fn healthz_and_sites() {
    let base = spawn_server(read_only_state()).await;
    let (status, body) = get(&format!("{base}/healthz")).await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");

    let (status, body) = get(&format!("{base}/sites")).await;
    assert_eq!(status, 200);
    assert_eq!(body.as_array().unwrap().len(), 23);

    let (status, body) = get(&format!("{base}/sites/lanl")).await;
    assert_eq!(status, 200);
    assert_eq!(body["code"], "LANL");
    assert_eq!(body["altitude_m"], 2125.0);

    let (status, _) = get(&format!("{base}/sites/NONE")).await;
    assert_eq!(status, 404);
}

#[tokio::test]
async fn flux_endpoint_matches_library_bit_for_bit() {
    let base = spawn_server(read_only_state()).await;
    let (status, body) = get(&format!("{base}/flux?site=LANL&pressure=779&band=0")).await;
    assert_eq!(status, 200);
    let direct = predict_flux(
        SiteCatalog::builtin().get("LANL").unwrap(),
        EnergyBand::Full,
        779.0,
    )
    .unwrap();
    assert_eq!(
        body["zeta"].as_f64().unwrap().to_bits(),
        direct.zeta.to_bits()
    );
    assert_eq!(
        body["flux_m2h"].as_f64().unwrap().to_bits(),
        direct.flux_m2h.to_bits()
    );
    assert!((body["zeta"].as_f64().unwrap() - (-0.0184)).abs() < 1e-12);
}

#[tokio::test]
async fn flux_endpoint_error_mapping() {
    let base = spawn_server(read_only_state()).await;
    let (status, body) = get(&format!("{base}/flux?site=NONE&pressure=1000")).await;
    assert_eq!(status, 404);
    assert!(body["error"].as_str().unwrap().contains("unknown site"));

    let (status, body) = get(&format!("{base}/flux?site=LANL&pressure=99999")).await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("out of range"));

    let (status, _) = get(&format!("{base}/flux?site=LANL&pressure=779&band=7")).await;
    assert_eq!(status, 400);
}

#[tokio::test]
async fn risk_endpoint_defaults_and_values() {
    let base = spawn_server(read_only_state()).await;
    let (status, body) = get(&format!(
        "{base}/risk?site=ORNL&pressure=979&fleet=18688&ckpt_cost=60"
    ))
    .await;
    assert_eq!(status, 200);
    assert_eq!(body["band"], "Mid");
    let sdc_fit = body["per_kind"][0]["fit"].as_f64().unwrap();
    assert!((sdc_fit - 2345.112).abs() < 1e-6);
    assert!(body["checkpoint"]["interval_s"].as_f64().unwrap() > 0.0);
    assert_eq!(body["fleet_size"], 18688);

    // A user-supplied cross-section replaces the built-in table.
    let (status, body) = get(&format!("{base}/risk?site=ORNL&pressure=979&sigma=4.8e-7")).await;
    assert_eq!(status, 200);
    assert_eq!(body["per_kind"].as_array().unwrap().len(), 1);
    assert!((body["total_fit"].as_f64().unwrap() - 2345.112).abs() < 1e-6);
}

#[tokio::test]
async fn now_endpoint_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("forecast.jsonl");

    let state = AppState::new(catalog(), true, Duration::from_millis(400));
    let mut config = ServeConfig::new("unused");
    config.poll_sites = vec!["ORNL".to_string()];
    config.poll_interval = Duration::from_millis(50);
    config.log_path = Some(log_path.clone());
    config.band = EnergyBand::Mid;
    let provider: Arc<dyn WeatherProvider + Send + Sync> = Arc::new(CannedPressure(979.0));
    let poller = service::spawn_poller(&state, provider, &config);
    let base = spawn_server(state).await;

    // Unknown site: 404 regardless of the live feed.
    let (status, _) = get(&format!("{base}/now/NOPE")).await;
    assert_eq!(status, 404);

    // Valid but unpolled site: 503.
    let (status, body) = get(&format!("{base}/now/LANL")).await;
    assert_eq!(status, 503);
    assert!(body["error"]
        .as_str()
        .unwrap()
        .contains("no live observation"));

    // The polled site turns 200 once the first cycle lands.
    let mut last = (0, Value::Null);
    for _ in 0..50 {
        last = get(&format!("{base}/now/ORNL")).await;
        if last.0 == 200 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert_eq!(last.0, 200, "body: {}", last.1);
    let record = &last.1;
    assert_eq!(record["site_code"], "ORNL");
    assert_eq!(record["pressure_hpa"], 979.0);
    let direct = predict_flux(
        SiteCatalog::builtin().get("ORNL").unwrap(),
        EnergyBand::Mid,
        979.0,
    )
    .unwrap();
    assert_eq!(
        record["flux_m2h"].as_f64().unwrap().to_bits(),
        direct.flux_m2h.to_bits()
    );
    assert!((record["fit"].as_f64().unwrap() - 2345.112).abs() < 1e-6);

    // The polling loop is the sole log writer; its records replay cleanly.
    let replay = read_log(&log_path).unwrap();
    assert!(!replay.records.is_empty());
    assert_eq!(replay.records[0].site_code, "ORNL");
    assert_eq!(
        replay.records[0].catalog_version,
        SiteCatalog::builtin().fingerprint()
    );

    // Once the poller stops, the record ages past the staleness limit
    // and the endpoint degrades to 503.
    poller.stop();
    tokio::time::sleep(Duration::from_millis(600)).await;
    let (status, body) = get(&format!("{base}/now/ORNL")).await;
    assert_eq!(status, 503, "body: {body}");
    assert!(body["error"].as_str().unwrap().contains("stale"));
}

#[tokio::test]
async fn serve_binds_and_reports_address() {
    let (tx, rx) = tokio::sync::oneshot::channel();
    let config = ServeConfig::new("127.0.0.1:0");
    tokio::spawn(service::serve(catalog(), config, None, move |addr| {
        let _ = tx.send(addr);
    }));
    let addr = rx.await.unwrap();
    let (status, body) = get(&format!("http://{addr}/healthz")).await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    // Without a provider the live feed reports unconfigured.
    let (status, body) = get(&format!("http://{addr}/now/ORNL")).await;
    assert_eq!(status, 503);
    assert!(body["error"].as_str().unwrap().contains("not configured"));
}

#[tokio::test]
async fn msl_observations_convert_to_station_level() {
    struct MslProvider;
    impl WeatherProvider for MslProvider {
        fn observe(&self, _: f64, _: f64) -> Result<Value, TransportError> {
            Ok(json!({"pressure_msl": 1013.2, "time": chrono::Utc::now().timestamp()}))
        }
    }
    let state = AppState::new(catalog(), true, Duration::from_secs(10));
    let mut config = ServeConfig::new("unused");
    config.poll_sites = vec!["NSCW".to_string()]; // 10 m asl: near-identity
    config.poll_interval = Duration::from_millis(50);
    let provider: Arc<dyn WeatherProvider + Send + Sync> = Arc::new(MslProvider);
    let _poller = service::spawn_poller(&state, provider, &config);
    let base = spawn_server(state).await;

    let mut last = (0, Value::Null);
    for _ in 0..50 {
        last = get(&format!("{base}/now/NSCW")).await;
        if last.0 == 200 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert_eq!(last.0, 200, "body: {}", last.1);
    let p = last.1["pressure_hpa"].as_f64().unwrap();
    // 10 m of altitude shaves ~1.2 hPa off the sea-level value.
    assert!(p < 1013.2 && p > 1011.0, "station pressure {p}");
}
