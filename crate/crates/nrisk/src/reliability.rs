//! Failure-rate arithmetic: neutron flux to FIT, MTBF, fleet MTBF and
//! checkpoint-interval advice.
//!
//! A device's sensitivity is its effective error cross-section `sigma_err`
//! (cm^2), measured in beam tests as the ratio of observed error rate to
//! injected flux; it already absorbs the device area. With the flux in
//! m^-2 h^-1 the failures-in-time rate is `FIT = 1e5 * flux * sigma` and
//! `MTBF = 1e9 / FIT` hours. A fleet of `n` identical devices fails `n`
//! times as often.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barometric::{self, BarometricError};
use crate::catalog::{EnergyBand, SiteRecord};

/// Unit bridge of the FIT formula for flux in m^-2 h^-1 and sigma in cm^2:
/// 1e9 device-hours times the m^-2 -> cm^-2 conversion (1e-4).
pub const FIT_COEFFICIENT: f64 = 1e5;

/// Device-hours in one FIT unit.
pub const HOURS_PER_FIT_UNIT: f64 = 1e9;

/// Fraction of the MTBF the checkpoint cost may reach before the first-order
/// interval formula stops being trustworthy.
pub const CHECKPOINT_COST_WARN_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("flux must be strictly positive, got {0}")]
    NonPositiveFlux(f64),
    #[error("cross-section must be strictly positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("FIT rate must be strictly positive, got {0}")]
    NonPositiveFit(f64),
    #[error("fleet size must be at least 1")]
    EmptyFleet,
    #[error("MTBF must be strictly positive, got {0}")]
    NonPositiveMtbf(f64),
    #[error("checkpoint cost must be strictly positive, got {0}")]
    NonPositiveCost(f64),
    #[error(transparent)]
    Barometric(#[from] BarometricError),
    #[error("sensitivity file line {line}: {message}")]
    SensitivityParse { line: usize, message: String },
}

/// Kind of radiation-induced error a cross-section applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    /// Silent data corruption.
    Sdc,
    /// Program or node crash.
    Crash,
    /// Detected but unrecoverable error.
    Due,
}

impl ErrorKind {
    pub fn parse(s: &str) -> Option<ErrorKind> {
        match s.to_ascii_lowercase().as_str() {
            "sdc" => Some(ErrorKind::Sdc),
            "crash" => Some(ErrorKind::Crash),
            "due" => Some(ErrorKind::Due),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Sdc => "SDC",
            ErrorKind::Crash => "crash",
            ErrorKind::Due => "DUE",
        }
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Effective error cross-section of one device model for one error kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSensitivity {
    pub device_name: String,
    pub error_kind: ErrorKind,
    /// Effective cross-section, cm^2.
    pub sigma_cm2: f64,
    /// Absolute uncertainty on the cross-section, cm^2.
    pub sigma_err_cm2: f64,
    pub source_note: String,
}

impl DeviceSensitivity {
    pub fn new(
        device_name: &str,
        error_kind: ErrorKind,
        sigma_cm2: f64,
        sigma_err_cm2: f64,
        source_note: &str,
    ) -> Result<DeviceSensitivity, ReliabilityError> {
        if !(sigma_cm2 > 0.0) {
            return Err(ReliabilityError::NonPositiveSigma(sigma_cm2));
        }
        if sigma_err_cm2 < 0.0 {
            return Err(ReliabilityError::NonPositiveSigma(sigma_err_cm2));
        }
        Ok(DeviceSensitivity {
            device_name: device_name.to_string(),
            error_kind,
            sigma_cm2,
            sigma_err_cm2,
            source_note: source_note.to_string(),
        })
    }
}

/// Built-in sensitivities for the K20X-class GPU, the only device with
/// published absolute cross-sections (vendors otherwise release relative
/// values only). Worst-case averages from white-neutron-beam campaigns.
pub fn builtin_sensitivities() -> Vec<DeviceSensitivity> {
    vec![
        DeviceSensitivity {
            device_name: "K20X-class GPU".to_string(),
            error_kind: ErrorKind::Sdc,
            sigma_cm2: 4.8e-7,
            sigma_err_cm2: 0.4e-7,
            source_note: "LANSCE/ISIS beam tests, worst-case average".to_string(),
        },
        DeviceSensitivity {
            device_name: "K20X-class GPU".to_string(),
            error_kind: ErrorKind::Crash,
            sigma_cm2: 2.7e-7,
            sigma_err_cm2: 0.2e-7,
            source_note: "LANSCE/ISIS beam tests, worst-case average".to_string(),
        },
    ]
}

/// Parse a device-sensitivity file.
///
/// Same conventions as the site catalog: UTF-8 CSV, `#` begins a comment,
/// header `device,error_kind,sigma_cm2,sigma_err_cm2,source`.
pub fn parse_sensitivity_file(document: &str) -> Result<Vec<DeviceSensitivity>, ReliabilityError> {
    const HEADER: [&str; 5] = [
        "device",
        "error_kind",
        "sigma_cm2",
        "sigma_err_cm2",
        "source",
    ];
    let mut out = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in document.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !saw_header {
            if fields != HEADER {
                return Err(ReliabilityError::SensitivityParse {
                    line,
                    message: format!("expected header {:?}", HEADER.join(",")),
                });
            }
            saw_header = true;
            continue;
        }
        if fields.len() != HEADER.len() {
            return Err(ReliabilityError::SensitivityParse {
                line,
                message: format!("expected {} fields, got {}", HEADER.len(), fields.len()),
            });
        }
        let kind =
            ErrorKind::parse(fields[1]).ok_or_else(|| ReliabilityError::SensitivityParse {
                line,
                message: format!(
                    "unknown error kind {:?} (expected SDC, crash or DUE)",
                    fields[1]
                ),
            })?;
        let sigma: f64 = fields[2]
            .parse()
            .map_err(|_| ReliabilityError::SensitivityParse {
                line,
                message: format!("cannot parse sigma {:?}", fields[2]),
            })?;
        let sigma_err: f64 = fields[3]
            .parse()
            .map_err(|_| ReliabilityError::SensitivityParse {
                line,
                message: format!("cannot parse sigma_err {:?}", fields[3]),
            })?;
        out.push(
            DeviceSensitivity::new(fields[0], kind, sigma, sigma_err, fields[4]).map_err(|e| {
                ReliabilityError::SensitivityParse {
                    line,
                    message: e.to_string(),
                }
            })?,
        );
    }
    Ok(out)
}

/// Failures in 1e9 device-hours for a flux (m^-2 h^-1) seen through an
/// effective cross-section (cm^2).
pub fn fit_rate(flux_m2h: f64, sigma_cm2: f64) -> Result<f64, ReliabilityError> {
    if !(flux_m2h > 0.0) {
        return Err(ReliabilityError::NonPositiveFlux(flux_m2h));
    }
    if !(sigma_cm2 > 0.0) {
        return Err(ReliabilityError::NonPositiveSigma(sigma_cm2));
    }
    Ok(FIT_COEFFICIENT * flux_m2h * sigma_cm2)
}

/// Pressure-dependent FIT rate, `1e5 * sigma * ref_flux * (1 + beta * dP)`.
///
/// Factorizes exactly through [`barometric::predict_flux`]; the direct form
/// is kept so the identity can be checked against the two-step route.
pub fn fit_rate_at_pressure(
    site: &SiteRecord,
    band: EnergyBand,
    sigma_cm2: f64,
    pressure_hpa: f64,
) -> Result<f64, ReliabilityError> {
    if !(sigma_cm2 > 0.0) {
        return Err(ReliabilityError::NonPositiveSigma(sigma_cm2));
    }
    let zeta = barometric::relative_variation(site, band, pressure_hpa)?;
    let flux = site.band(band).ref_flux * (1.0 + zeta);
    if !(flux > 0.0) {
        return Err(ReliabilityError::NonPositiveFlux(flux));
    }
    Ok(FIT_COEFFICIENT * sigma_cm2 * flux)
}

/// Mean time between failures in hours for a device with the given FIT rate.
pub fn mtbf_hours(fit: f64) -> Result<f64, ReliabilityError> {
    if !(fit > 0.0) {
        return Err(ReliabilityError::NonPositiveFit(fit));
    }
    Ok(HOURS_PER_FIT_UNIT / fit)
}

/// MTBF of a fleet of identical devices; failures scale with fleet size.
pub fn fleet_mtbf_hours(fit_per_device: f64, fleet_size: u64) -> Result<f64, ReliabilityError> {
    if fleet_size == 0 {
        return Err(ReliabilityError::EmptyFleet);
    }
    if !(fit_per_device > 0.0) {
        return Err(ReliabilityError::NonPositiveFit(fit_per_device));
    }
    Ok(HOURS_PER_FIT_UNIT / (fit_per_device * fleet_size as f64))
}

/// Relative FIT variation `psi = beta * dP`.
///
/// FIT is linear in the flux, so its relative variation equals the flux's
/// relative variation `zeta` identically.
pub fn relative_fit_variation(
    site: &SiteRecord,
    band: EnergyBand,
    pressure_hpa: f64,
) -> Result<f64, ReliabilityError> {
    Ok(barometric::relative_variation(site, band, pressure_hpa)?)
}

/// First-order optimal checkpoint interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointAdvice {
    /// Recommended interval between checkpoints, seconds.
    pub interval_s: f64,
    /// Set when the checkpoint cost exceeds a tenth of the MTBF; the
    /// first-order formula is unreliable that deep into the failure rate.
    pub cost_warning: bool,
}

/// Young-Daly first-order interval: `sqrt(2 * cost * MTBF)`, in seconds.
pub fn checkpoint_interval(
    mtbf_h: f64,
    checkpoint_cost_s: f64,
) -> Result<CheckpointAdvice, ReliabilityError> {
    if !(mtbf_h > 0.0) {
        return Err(ReliabilityError::NonPositiveMtbf(mtbf_h));
    }
    if !(checkpoint_cost_s > 0.0) {
        return Err(ReliabilityError::NonPositiveCost(checkpoint_cost_s));
    }
    let mtbf_s = mtbf_h * 3600.0;
    Ok(CheckpointAdvice {
        interval_s: (2.0 * checkpoint_cost_s * mtbf_s).sqrt(),
        cost_warning: checkpoint_cost_s > mtbf_s * CHECKPOINT_COST_WARN_FRACTION,
    })
}

/// Per-device, per-kind FIT entry of a [`RiskReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindRate {
    pub device: String,
    pub error_kind: ErrorKind,
    pub sigma_cm2: f64,
    pub fit: f64,
}

/// Full risk assessment for one site/band/pressure query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub site_code: String,
    pub band: EnergyBand,
    pub pressure_hpa: f64,
    pub flux_m2h: f64,
    /// FIT per error kind; the total is their sum.
    pub per_kind: Vec<KindRate>,
    pub total_fit: f64,
    /// Per-device MTBF from the total FIT, hours.
    pub mtbf_hours: f64,
    pub fleet_size: u64,
    pub fleet_mtbf_hours: f64,
    /// Relative FIT variation at this pressure (equals zeta).
    pub psi: f64,
    pub checkpoint: Option<CheckpointAdvice>,
    /// Where the inputs came from (catalog entry, sigma sources).
    pub provenance: Vec<String>,
}

/// Assemble a [`RiskReport`] from a flux prediction and device sensitivities.
pub fn risk_report(
    site: &SiteRecord,
    band: EnergyBand,
    pressure_hpa: f64,
    sensitivities: &[DeviceSensitivity],
    fleet_size: u64,
    checkpoint_cost_s: Option<f64>,
) -> Result<RiskReport, ReliabilityError> {
    let prediction = barometric::predict_flux(site, band, pressure_hpa)?;
    let mut per_kind = Vec::with_capacity(sensitivities.len());
    let mut total_fit = 0.0;
    let mut provenance = vec![format!(
        "site {}: ref_flux {} m^-2 h^-1, beta {} hPa^-1, P_ref {} hPa ({}); measured neutron flux {} ± {} m^-2 h^-1",
        site.code,
        site.band(band).ref_flux,
        site.band(band).beta,
        site.ref_pressure_hpa,
        band.energy_range(),
        site.flux_neutron.value,
        site.flux_neutron.uncertainty,
    )];
    if prediction.extrapolation {
        provenance.push(format!(
            "warning: |dP| = {:.1} hPa exceeds the {} hPa window the coefficients were derived for",
            prediction.delta_p_hpa.abs(),
            barometric::EXTRAPOLATION_LIMIT_HPA
        ));
    }
    for s in sensitivities {
        let fit = fit_rate(prediction.flux_m2h, s.sigma_cm2)?;
        total_fit += fit;
        provenance.push(format!(
            "sigma[{} {}] = {} ± {} cm^2 ({})",
            s.device_name, s.error_kind, s.sigma_cm2, s.sigma_err_cm2, s.source_note
        ));
        per_kind.push(KindRate {
            device: s.device_name.clone(),
            error_kind: s.error_kind,
            sigma_cm2: s.sigma_cm2,
            fit,
        });
    }
    let mtbf = mtbf_hours(total_fit)?;
    let fleet = fleet_mtbf_hours(total_fit, fleet_size)?;
    let checkpoint = match checkpoint_cost_s {
        Some(cost) => Some(checkpoint_interval(fleet, cost)?),
        None => None,
    };
    Ok(RiskReport {
        site_code: site.code.clone(),
        band,
        pressure_hpa,
        flux_m2h: prediction.flux_m2h,
        per_kind,
        total_fit,
        mtbf_hours: mtbf,
        fleet_size,
        fleet_mtbf_hours: fleet,
        psi: prediction.zeta,
        checkpoint,
        provenance,
    })
}
