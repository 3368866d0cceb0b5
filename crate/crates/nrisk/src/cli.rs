//! Command-line surface.
//!
//! Thin wrappers over the library: every subcommand maps to one module
//! pipeline and prints either a human table or, with `--format json`, the
//! full-precision serialized value. Exit codes: 0 success, 1 domain error,
//! 2 usage error (from argument parsing).

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::atmosphere::{fit_linsley, LinsleyFitConfig};
use crate::barometric;
use crate::catalog::{EnergyBand, SiteCatalog, SiteRecord};
use crate::ingest::weather::HttpWeatherClient;
use crate::ingest::{parse_profile, WeatherProvider};
use crate::refcheck;
use crate::reliability::{self, DeviceSensitivity};
use crate::service::{self, ServeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "nrisk",
    version,
    about = "Neutron-flux and failure-rate forecasts for exascale sites from barometric pressure"
)]
pub struct Cli {
    /// Catalog file overriding the built-in site catalog.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the site catalog, or show one site in full.
    Sites {
        /// Site code (case-insensitive).
        #[arg(long)]
        code: Option<String>,
    },
    /// Predict the neutron flux at a site for a given surface pressure.
    Flux {
        #[arg(long)]
        site: String,
        /// Station-level pressure, hPa.
        #[arg(long)]
        pressure: f64,
        /// Energy band index: 0 (full), 1 (mid), 2 (high).
        #[arg(long, default_value_t = 0)]
        band: usize,
    },
    /// Full risk report: FIT, MTBF, fleet MTBF and checkpoint advice.
    Risk {
        #[arg(long)]
        site: String,
        /// Station-level pressure, hPa.
        #[arg(long)]
        pressure: f64,
        /// Energy band index; defaults to 1 (50..1000 MeV dominates rates).
        #[arg(long, default_value_t = 1)]
        band: usize,
        /// Effective cross-section in cm^2, replacing the built-in table.
        #[arg(long)]
        sigma: Option<f64>,
        /// Device-sensitivity CSV replacing the built-in table.
        #[arg(long)]
        devices: Option<PathBuf>,
        /// Number of identical devices in the fleet.
        #[arg(long, default_value_t = 1)]
        fleet: u64,
        /// Checkpoint cost in seconds; enables checkpoint-interval advice.
        #[arg(long)]
        ckpt_cost: Option<f64>,
    },
    /// Young-Daly checkpoint interval for a given MTBF and checkpoint cost.
    Checkpoint {
        /// MTBF in hours.
        #[arg(long)]
        mtbf: f64,
        /// Checkpoint cost in seconds.
        #[arg(long)]
        cost: f64,
    },
    /// Fit a layered atmosphere to a density-profile file.
    FitProfile {
        /// Profile file (`# site=.. month=..` metadata plus altitude,density rows).
        #[arg(long)]
        input: PathBuf,
        /// Four layer boundaries in metres, comma-separated.
        #[arg(long, value_delimiter = ',')]
        boundaries: Option<Vec<f64>>,
        /// Top of the atmosphere in metres.
        #[arg(long)]
        top: Option<f64>,
    },
    /// Fit a barometric coefficient to a pressure/flux series file.
    FitBeta {
        /// CSV file with `pressure_hpa,flux_m2h` rows (`#` comments).
        #[arg(long)]
        input: PathBuf,
    },
    /// Recompute the published reference examples and report pass/fail.
    PaperCheck,
    /// Serve the read-only HTTP API (and optionally poll live pressure).
    Serve {
        /// Bind address.
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Site codes to poll for live pressure (repeatable).
        #[arg(long = "poll-site")]
        poll_sites: Vec<String>,
        /// Polling interval in seconds.
        #[arg(long, default_value_t = 900)]
        poll_interval_s: u64,
        /// Append polled forecasts to this log file.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Band used by the polling loop.
        #[arg(long, default_value_t = 1)]
        band: usize,
    },
}

/// Flux in m^-2 h^-1 at 4 significant digits.
fn fmt_flux(x: f64) -> String {
    format!("{x:.3e}")
}

/// Relative variation as a percentage, 2 decimals.
fn fmt_pct(x: f64) -> String {
    format!("{:+.2}%", x * 100.0)
}

/// FIT rates print as integers, matching how they are quoted.
fn fmt_fit(x: f64) -> String {
    format!("{x:.0}")
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serialization cannot fail")
    );
}

fn parse_band(index: usize) -> Result<EnergyBand, String> {
    EnergyBand::from_index(index).ok_or_else(|| format!("band must be 0, 1 or 2, got {index}"))
}

fn load_catalog(path: &Option<PathBuf>) -> Result<Arc<SiteCatalog>, String> {
    match path {
        None => Ok(Arc::new(SiteCatalog::builtin().clone())),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read catalog {}: {e}", p.display()))?;
            Ok(Arc::new(
                SiteCatalog::load(&text).map_err(|e| e.to_string())?,
            ))
        }
    }
}

fn print_site_table(sites: &[SiteRecord]) {
    println!(
        "{:<6} {:<8} {:>7} {:>7} {:>10} {:>10}  name",
        "code", "country", "alt_m", "P_ref", "flux0", "beta0"
    );
    for s in sites {
        println!(
            "{:<6} {:<8} {:>7} {:>7} {:>10} {:>10}  {}",
            s.code,
            s.country,
            s.altitude_m,
            s.ref_pressure_hpa,
            fmt_flux(s.band(EnergyBand::Full).ref_flux),
            format!("{:.1e}", s.band(EnergyBand::Full).beta),
            s.name
        );
    }
}

fn print_site_detail(s: &SiteRecord) {
    println!("{} — {} ({})", s.code, s.name, s.country);
    println!(
        "  altitude {} m, lat {}, lon {}",
        s.altitude_m, s.latitude_deg, s.longitude_deg
    );
    println!("  reference pressure {} hPa", s.ref_pressure_hpa);
    println!(
        "  flux: all {} ± {}, neutron {} ± {}, muon {} ± {} m^-2 h^-1",
        fmt_flux(s.flux_all.value),
        fmt_flux(s.flux_all.uncertainty),
        fmt_flux(s.flux_neutron.value),
        fmt_flux(s.flux_neutron.uncertainty),
        fmt_flux(s.flux_muon.value),
        fmt_flux(s.flux_muon.uncertainty)
    );
    for b in &s.bands {
        println!(
            "  band {} ({}): ref flux {} m^-2 h^-1, beta {:.1e} hPa^-1",
            b.band.index(),
            b.band.energy_range(),
            fmt_flux(b.ref_flux),
            b.beta
        );
    }
}

/// Execute a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(message) => {
            eprintln!("error: {message}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<(), String> {
    let catalog = load_catalog(&cli.catalog)?;
    let json = cli.format == OutputFormat::Json;

    match cli.command {
        Command::Sites { code } => match code {
            Some(code) => {
                let site = catalog.get(&code).map_err(|e| e.to_string())?;
                if json {
                    print_json(site);
                } else {
                    print_site_detail(site);
                }
            }
            None => {
                if json {
                    print_json(&catalog.sites());
                } else {
                    print_site_table(catalog.sites());
                }
            }
        },
        Command::Flux {
            site,
            pressure,
            band,
        } => {
            let site = catalog.get(&site).map_err(|e| e.to_string())?;
            let band = parse_band(band)?;
            let prediction =
                barometric::predict_flux(site, band, pressure).map_err(|e| e.to_string())?;
            if json {
                print_json(&prediction);
            } else {
                println!(
                    "{} {}: P = {} hPa (dP = {:+.1}), zeta = {}, flux = {} m^-2 h^-1{}",
                    prediction.site_code,
                    prediction.band,
                    prediction.pressure_hpa,
                    prediction.delta_p_hpa,
                    fmt_pct(prediction.zeta),
                    fmt_flux(prediction.flux_m2h),
                    if prediction.extrapolation {
                        "  [extrapolated]"
                    } else {
                        ""
                    }
                );
            }
        }
        Command::Risk {
            site,
            pressure,
            band,
            sigma,
            devices,
            fleet,
            ckpt_cost,
        } => {
            let site = catalog.get(&site).map_err(|e| e.to_string())?;
            let band = parse_band(band)?;
            let sensitivities: Vec<DeviceSensitivity> = match (sigma, devices) {
                (Some(_), Some(_)) => {
                    return Err("--sigma and --devices are mutually exclusive".to_string())
                }
                (Some(sigma), None) => vec![DeviceSensitivity::new(
                    "user-device",
                    reliability::ErrorKind::Sdc,
                    sigma,
                    0.0,
                    "command line",
                )
                .map_err(|e| e.to_string())?],
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    reliability::parse_sensitivity_file(&text).map_err(|e| e.to_string())?
                }
                (None, None) => reliability::builtin_sensitivities(),
            };
            let report =
                reliability::risk_report(site, band, pressure, &sensitivities, fleet, ckpt_cost)
                    .map_err(|e| e.to_string())?;
            if json {
                print_json(&report);
            } else {
                println!(
                    "{} {} at {} hPa: flux {} m^-2 h^-1, psi {}",
                    report.site_code,
                    report.band,
                    report.pressure_hpa,
                    fmt_flux(report.flux_m2h),
                    fmt_pct(report.psi)
                );
                for k in &report.per_kind {
                    println!(
                        "  {} [{}]: sigma {:.1e} cm^2 -> {} FIT",
                        k.device,
                        k.error_kind,
                        k.sigma_cm2,
                        fmt_fit(k.fit)
                    );
                }
                println!(
                    "  total {} FIT, device MTBF {:.0} h, fleet of {} -> {:.1} h",
                    fmt_fit(report.total_fit),
                    report.mtbf_hours,
                    report.fleet_size,
                    report.fleet_mtbf_hours
                );
                if let Some(ck) = &report.checkpoint {
                    println!(
                        "  checkpoint interval {:.0} s (~{:.1} min){}",
                        ck.interval_s,
                        ck.interval_s / 60.0,
                        if ck.cost_warning {
                            "  [cost > MTBF/10]"
                        } else {
                            ""
                        }
                    );
                }
            }
        }
        Command::Checkpoint { mtbf, cost } => {
            let advice = reliability::checkpoint_interval(mtbf, cost).map_err(|e| e.to_string())?;
            if json {
                print_json(&advice);
            } else {
                println!(
                    "MTBF {mtbf} h, cost {cost} s -> interval {:.0} s (~{:.1} min){}",
                    advice.interval_s,
                    advice.interval_s / 60.0,
                    if advice.cost_warning {
                        "  [cost > MTBF/10]"
                    } else {
                        ""
                    }
                );
            }
        }
        Command::FitProfile {
            input,
            boundaries,
            top,
        } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let profile = parse_profile(&text).map_err(|e| e.to_string())?;
            let mut config = LinsleyFitConfig::default();
            if let Some(b) = boundaries {
                if b.len() != 4 {
                    return Err(format!(
                        "--boundaries needs exactly 4 values, got {}",
                        b.len()
                    ));
                }
                config.boundaries_m = [b[0], b[1], b[2], b[3]];
            }
            if let Some(t) = top {
                config.top_m = t;
            }
            let fit = fit_linsley(&profile, &config).map_err(|e| e.to_string())?;
            let ground = profile.min_altitude_m().max(0.0);
            let summary = FitSummary {
                label: profile.label().to_string(),
                boundaries_m: config.boundaries_m,
                top_m: config.top_m,
                layers: fit
                    .atmosphere
                    .exponential_layers()
                    .iter()
                    .zip(&fit.layers)
                    .map(|(l, d)| LayerSummary {
                        layer: d.layer,
                        b_g_cm2: l.b_g_cm2,
                        scale_height_m: l.scale_height_m,
                        samples: d.samples,
                        residual_rms_log: d.residual_rms_log,
                        extrapolated: d.extrapolated,
                    })
                    .collect(),
                ground_altitude_m: ground,
                ground_depth_g_cm2: fit.atmosphere.depth_at(ground).map_err(|e| e.to_string())?,
                ground_pressure_hpa: fit
                    .atmosphere
                    .pressure_at(ground)
                    .map_err(|e| e.to_string())?,
            };
            if json {
                print_json(&summary);
            } else {
                println!("profile {}", summary.label);
                for l in &summary.layers {
                    println!(
                        "  layer {}: b = {:.4} g/cm^2, c = {:.2} m, samples {}{}{}",
                        l.layer,
                        l.b_g_cm2,
                        l.scale_height_m,
                        l.samples,
                        if l.extrapolated {
                            " [standard extension]"
                        } else {
                            ""
                        },
                        if l.samples > 0 {
                            format!(", rms(log) {:.2e}", l.residual_rms_log)
                        } else {
                            String::new()
                        }
                    );
                }
                println!(
                    "  ground ({} m): depth {:.2} g/cm^2, pressure {:.1} hPa",
                    summary.ground_altitude_m,
                    summary.ground_depth_g_cm2,
                    summary.ground_pressure_hpa
                );
            }
        }
        Command::FitBeta { input } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let series = parse_pressure_flux_series(&text)?;
            let fit = barometric::fit_beta(&series).map_err(|e| e.to_string())?;
            if json {
                print_json(&fit);
            } else {
                println!(
                    "beta = {:.4e} hPa^-1 (ref {} m^-2 h^-1 at {:.1} hPa, residual rms {:.2e}, {} samples)",
                    fit.beta,
                    fmt_flux(fit.ref_flux),
                    fit.ref_pressure_hpa,
                    fit.residual_rms,
                    series.len()
                );
            }
        }
        Command::PaperCheck => {
            let checks = refcheck::run_reference_checks(&catalog);
            if json {
                print_json(&checks);
            } else {
                for c in &checks {
                    println!(
                        "{} {}: expected {}, computed {}, tol {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.check,
                        c.expected,
                        c.computed,
                        c.tolerance
                    );
                }
            }
            if !refcheck::all_passed(&checks) {
                return Err("reference checks failed".to_string());
            }
        }
        Command::Serve {
            bind,
            poll_sites,
            poll_interval_s,
            log,
            band,
        } => {
            let band = parse_band(band)?;
            for code in &poll_sites {
                catalog.get(code).map_err(|e| e.to_string())?;
            }
            let mut config = ServeConfig::new(bind);
            config.poll_interval = Duration::from_secs(poll_interval_s.max(1));
            config.staleness_limit = config.poll_interval * 3;
            config.poll_sites = poll_sites;
            config.log_path = log;
            config.band = band;
            let provider: Option<Arc<dyn WeatherProvider + Send + Sync>> =
                if config.poll_sites.is_empty() {
                    None
                } else {
                    Some(Arc::new(
                        HttpWeatherClient::from_env().map_err(|e| e.to_string())?,
                    ))
                };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime
                .block_on(service::serve(catalog, config, provider, |addr| {
                    eprintln!("listening on http://{addr}");
                }))
                .map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LayerSummary {
    layer: usize,
    b_g_cm2: f64,
    scale_height_m: f64,
    samples: usize,
    residual_rms_log: f64,
    extrapolated: bool,
}

#[derive(Serialize)]
struct FitSummary {
    label: String,
    boundaries_m: [f64; 4],
    top_m: f64,
    layers: Vec<LayerSummary>,
    ground_altitude_m: f64,
    ground_depth_g_cm2: f64,
    ground_pressure_hpa: f64,
}

/// Rows of `pressure_hpa,flux_m2h`, `#` comments allowed.
fn parse_pressure_flux_series(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut series = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(format!(
                "line {line}: expected `pressure_hpa,flux_m2h`, got {trimmed:?}"
            ));
        }
        let p: f64 = fields[0]
            .parse()
            .map_err(|_| format!("line {line}: cannot parse pressure {:?}", fields[0]))?;
        let f: f64 = fields[1]
            .parse()
            .map_err(|_| format!("line {line}: cannot parse flux {:?}", fields[1]))?;
        series.push((p, f));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band(0).unwrap(), EnergyBand::Full);
        assert_eq!(parse_band(2).unwrap(), EnergyBand::High);
        assert!(parse_band(3).is_err());
    }

    #[test]
    fn pressure_flux_series_parser() {
        let text = "# comment\n984,4.8e4\n979,4.886e4\n";
        let series = parse_pressure_flux_series(text).unwrap();
        assert_eq!(series, vec![(984.0, 4.8e4), (979.0, 4.886e4)]);
        assert!(parse_pressure_flux_series("nope\n").is_err());
    }

    #[test]
    fn formatting_matches_presentation_rules() {
        assert_eq!(fmt_flux(41_090.4), "4.109e4");
        assert_eq!(fmt_pct(0.0536), "+5.36%");
        assert_eq!(fmt_pct(-0.0184), "-1.84%");
        assert_eq!(fmt_fit(2345.112), "2345");
    }
}
