//! Barometric flux model: predicts the neutron flux at a site from the
//! local surface pressure.
//!
//! Per-site pressure excursions are small, so the relative flux variation in
//! band `i` is linear in the pressure offset from the site reference:
//! `zeta_i = beta_i * (P - P_ref)`, with `beta_i < 0` (denser air column,
//! fewer neutrons at the ground). The underlying dependence is exponential;
//! the linear form is the contract here and the exponential shows up only as
//! a tolerance in the coefficient-fitting tests.

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{EnergyBand, SiteRecord};

/// Physical window for surface pressures accepted by the model, hPa
/// (exclusive bounds).
pub const PRESSURE_RANGE_HPA: (f64, f64) = (500.0, 1100.0);

/// Pressure offsets beyond this are outside the range the coefficients were
/// derived for; predictions still evaluate but carry the extrapolation flag.
/// The largest excursion in the reference examples is -8 hPa, and severe
/// storms move the surface pressure by several hPa.
pub const EXTRAPOLATION_LIMIT_HPA: f64 = 20.0;

/// Hard validity limit for inverting the model: beyond this the linear form
/// can predict non-physical (non-positive) fluxes.
pub const VALIDITY_LIMIT_HPA: f64 = 100.0;

#[derive(Debug, Error)]
pub enum BarometricError {
    #[error(
        "pressure {pressure} hPa out of range ({}, {}) hPa",
        PRESSURE_RANGE_HPA.0,
        PRESSURE_RANGE_HPA.1
    )]
    PressureOutOfRange { pressure: f64 },
    #[error(
        "linear model invalid: predicted flux {flux} m^-2 h^-1 at {pressure} hPa (dP = {delta_p} hPa)"
    )]
    ModelValidity {
        pressure: f64,
        delta_p: f64,
        flux: f64,
    },
    #[error("target flux must be strictly positive, got {0}")]
    NonPositiveTarget(f64),
    #[error(
        "target flux {target} m^-2 h^-1 implies dP = {delta_p:.1} hPa, beyond the {} hPa validity window",
        VALIDITY_LIMIT_HPA
    )]
    TargetOutOfValidity { target: f64, delta_p: f64 },
    #[error("coefficient fit needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("degenerate series: zero pressure variance across {0} samples")]
    DegenerateSeries(usize),
    #[error("flux samples must be strictly positive (sample {index} is {flux})")]
    NonPositiveFlux { index: usize, flux: f64 },
}

/// Predicted neutron flux for one band at one pressure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxPrediction {
    pub site_code: String,
    pub band: EnergyBand,
    /// Input surface pressure, hPa.
    pub pressure_hpa: f64,
    /// `P - P_ref`, hPa.
    pub delta_p_hpa: f64,
    /// Relative flux variation `beta * delta_p` (dimensionless).
    pub zeta: f64,
    /// Predicted flux `ref_flux * (1 + zeta)`, m^-2 h^-1.
    pub flux_m2h: f64,
    /// Set when `|delta_p|` exceeds [`EXTRAPOLATION_LIMIT_HPA`].
    pub extrapolation: bool,
}

fn check_pressure(pressure_hpa: f64) -> Result<(), BarometricError> {
    let (lo, hi) = PRESSURE_RANGE_HPA;
    if !(pressure_hpa > lo && pressure_hpa < hi) || !pressure_hpa.is_finite() {
        return Err(BarometricError::PressureOutOfRange {
            pressure: pressure_hpa,
        });
    }
    Ok(())
}

/// Relative flux variation `zeta_i = beta_i * (P - P_ref)` for one band.
///
/// Negative when the pressure sits above the site reference.
pub fn relative_variation(
    site: &SiteRecord,
    band: EnergyBand,
    pressure_hpa: f64,
) -> Result<f64, BarometricError> {
    check_pressure(pressure_hpa)?;
    let model = site.band(band);
    Ok(model.beta * (pressure_hpa - site.ref_pressure_hpa))
}

/// Predicted band flux `ref_flux * (1 + beta * dP)` at a given pressure.
pub fn predict_flux(
    site: &SiteRecord,
    band: EnergyBand,
    pressure_hpa: f64,
) -> Result<FluxPrediction, BarometricError> {
    let zeta = relative_variation(site, band, pressure_hpa)?;
    let model = site.band(band);
    let delta_p = pressure_hpa - site.ref_pressure_hpa;
    let flux = model.ref_flux * (1.0 + zeta);
    if flux <= 0.0 {
        return Err(BarometricError::ModelValidity {
            pressure: pressure_hpa,
            delta_p,
            flux,
        });
    }
    Ok(FluxPrediction {
        site_code: site.code.clone(),
        band,
        pressure_hpa,
        delta_p_hpa: delta_p,
        zeta,
        flux_m2h: flux,
        extrapolation: delta_p.abs() > EXTRAPOLATION_LIMIT_HPA,
    })
}

/// Inverse of [`predict_flux`]: the unique pressure at which the band flux
/// equals `target_flux`.
pub fn pressure_for_flux(
    site: &SiteRecord,
    band: EnergyBand,
    target_flux_m2h: f64,
) -> Result<f64, BarometricError> {
    if !(target_flux_m2h > 0.0) {
        return Err(BarometricError::NonPositiveTarget(target_flux_m2h));
    }
    let model = site.band(band);
    let delta_p = (target_flux_m2h / model.ref_flux - 1.0) / model.beta;
    if delta_p.abs() > VALIDITY_LIMIT_HPA {
        return Err(BarometricError::TargetOutOfValidity {
            target: target_flux_m2h,
            delta_p,
        });
    }
    Ok(site.ref_pressure_hpa + delta_p)
}

/// Result of fitting a barometric coefficient to a paired series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaFit {
    /// Fitted barometric coefficient, hPa^-1.
    pub beta: f64,
    /// Reference flux (sample mean), m^-2 h^-1.
    pub ref_flux: f64,
    /// Reference pressure (sample mean), hPa.
    pub ref_pressure_hpa: f64,
    /// RMS of the residuals `zeta_i - beta * dP_i`.
    pub residual_rms: f64,
}

/// Fit a barometric coefficient to a `(pressure hPa, flux m^-2 h^-1)` series.
///
/// The reference pair is the sample mean, after which `beta` is the ordinary
/// least-squares slope of `flux/ref_flux - 1` against `P - P_ref`. Noiseless
/// linear data is recovered exactly (residual RMS at machine level).
pub fn fit_beta(series: &[(f64, f64)]) -> Result<BetaFit, BarometricError> {
    if series.len() < 3 {
        return Err(BarometricError::TooFewSamples(series.len()));
    }
    for (index, &(_, flux)) in series.iter().enumerate() {
        if !(flux > 0.0) {
            return Err(BarometricError::NonPositiveFlux { index, flux });
        }
    }
    let n = series.len() as f64;
    let ref_pressure = series.iter().map(|(p, _)| p).sum::<f64>() / n;
    let ref_flux = series.iter().map(|(_, f)| f).sum::<f64>() / n;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(p, f) in series {
        let dp = p - ref_pressure;
        let zeta = f / ref_flux - 1.0;
        sxx += dp * dp;
        sxy += dp * zeta;
    }
    if sxx == 0.0 {
        return Err(BarometricError::DegenerateSeries(series.len()));
    }
    let beta = sxy / sxx;

    let mut ss = 0.0;
    for &(p, f) in series {
        let r = (f / ref_flux - 1.0) - beta * (p - ref_pressure);
        ss += r * r;
    }
    Ok(BetaFit {
        beta,
        ref_flux,
        ref_pressure_hpa: ref_pressure,
        residual_rms: (ss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::SiteCatalog;
    use approx::assert_relative_eq;

    fn site(code: &str) -> &'static SiteRecord {
        SiteCatalog::builtin().get(code).unwrap()
    }

    #[test]
    fn lanl_sunny_day_reduction() {
        // beta0 * (779 - 777) = -9.2e-3 * 2
        let zeta = relative_variation(site("LANL"), EnergyBand::Full, 779.0).unwrap();
        assert_relative_eq!(zeta, -1.84e-2, max_relative = 1e-12);
    }

    #[test]
    fn rccs_thunderstorm_increase() {
        // beta0 * (1002 - 1010) = -6.7e-3 * (-8)
        let zeta = relative_variation(site("RCCS"), EnergyBand::Full, 1002.0).unwrap();
        assert_relative_eq!(zeta, 5.36e-2, max_relative = 1e-12);
    }

    #[test]
    fn zero_offset_means_zero_variation() {
        for s in SiteCatalog::builtin().sites() {
            for band in EnergyBand::ALL {
                assert_eq!(
                    relative_variation(s, band, s.ref_pressure_hpa).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn lanl_flux_prediction() {
        let p = predict_flux(site("LANL"), EnergyBand::Full, 779.0).unwrap();
        // 26.4e4 * (1 - 0.0184) = 25.914e4
        assert_relative_eq!(p.flux_m2h, 259_142.4, max_relative = 1e-12);
        assert!(!p.extrapolation);
        assert_relative_eq!(
            p.flux_m2h,
            p.zeta.mul_add(26.4e4, 26.4e4),
            max_relative = 1e-15
        );
    }

    #[test]
    fn ornl_mid_band_prediction() {
        // 4.7e4 * (1 + (-7.9e-3)(979 - 984)) = 4.7e4 * 1.0395
        let p = predict_flux(site("ORNL"), EnergyBand::Mid, 979.0).unwrap();
        assert_relative_eq!(p.flux_m2h, 48_856.5, max_relative = 1e-12);
        assert_relative_eq!(p.zeta, 0.0395, max_relative = 1e-12);
    }

    #[test]
    fn reference_pressure_returns_reference_flux() {
        let s = site("NSCW");
        assert_eq!(s.ref_pressure_hpa, 1014.0);
        let p = predict_flux(s, EnergyBand::High, 1014.0).unwrap();
        assert_eq!(p.flux_m2h, s.band(EnergyBand::High).ref_flux);
    }

    #[test]
    fn extrapolation_flag_beyond_20_hpa() {
        let s = site("ORNL");
        assert!(
            !predict_flux(s, EnergyBand::Full, 984.0 - 20.0)
                .unwrap()
                .extrapolation
        );
        assert!(
            predict_flux(s, EnergyBand::Full, 984.0 - 20.5)
                .unwrap()
                .extrapolation
        );
        assert!(
            predict_flux(s, EnergyBand::Full, 984.0 + 20.5)
                .unwrap()
                .extrapolation
        );
    }

    #[test]
    fn huge_offset_breaks_model_validity() {
        // At LANL's beta0, dP >= ~109 hPa drives the linear flux negative
        // while the pressure itself is still physically plausible.
        let err = predict_flux(site("LANL"), EnergyBand::Full, 890.0).unwrap_err();
        assert!(
            matches!(err, BarometricError::ModelValidity { .. }),
            "{err}"
        );
    }

    #[test]
    fn pressure_out_of_physical_range() {
        let err = relative_variation(site("RCCS"), EnergyBand::Full, 99_999.0).unwrap_err();
        assert!(matches!(err, BarometricError::PressureOutOfRange { .. }));
        assert!(relative_variation(site("RCCS"), EnergyBand::Full, 500.0).is_err());
        assert!(relative_variation(site("RCCS"), EnergyBand::Full, 1100.0).is_err());
    }

    #[test]
    fn pressure_for_flux_inverts_prediction() {
        let s = site("LANL");
        assert_relative_eq!(
            pressure_for_flux(s, EnergyBand::Full, 26.4e4).unwrap(),
            777.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            pressure_for_flux(s, EnergyBand::Full, 259_142.4).unwrap(),
            779.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn pressure_for_flux_rejects_bad_targets() {
        let s = site("LANL");
        assert!(matches!(
            pressure_for_flux(s, EnergyBand::Full, 0.0),
            Err(BarometricError::NonPositiveTarget(_))
        ));
        // A doubled flux needs dP ~ -109 hPa at LANL's beta0.
        assert!(matches!(
            pressure_for_flux(s, EnergyBand::Full, 2.0 * 26.4e4),
            Err(BarometricError::TargetOutOfValidity { .. })
        ));
    }

    #[test]
    fn fit_recovers_lanl_coefficient_from_synthetic_year() {
        let s = site("LANL");
        let model = s.band(EnergyBand::Full);
        let series: Vec<(f64, f64)> = (0..12)
            .map(|k| {
                let dp = -5.5 + k as f64; // symmetric about the reference
                let p = s.ref_pressure_hpa + dp;
                (p, model.ref_flux * (1.0 + model.beta * dp))
            })
            .collect();
        let fit = fit_beta(&series).unwrap();
        assert_relative_eq!(fit.beta, -9.2e-3, max_relative = 1e-9);
        assert_relative_eq!(fit.ref_pressure_hpa, 777.0, max_relative = 1e-12);
        assert_relative_eq!(fit.ref_flux, 26.4e4, max_relative = 1e-12);
        assert!(fit.residual_rms < 1e-12, "residual {}", fit.residual_rms);
    }

    #[test]
    fn constant_flux_fits_zero_beta() {
        let series: Vec<(f64, f64)> = (0..12).map(|k| (990.0 + k as f64, 4.2e4)).collect();
        let fit = fit_beta(&series).unwrap();
        assert_eq!(fit.beta, 0.0);
    }

    #[test]
    fn exponential_law_fits_linearly_within_3_percent() {
        // flux = ref * exp(beta dP) with |dP| <= 5 hPa: the straight-line fit
        // absorbs the quadratic Taylor remainder.
        let beta = -9.2e-3;
        let series: Vec<(f64, f64)> = (0..11)
            .map(|k| {
                let dp = -5.0 + k as f64;
                (777.0 + dp, 26.4e4 * (beta * dp).exp())
            })
            .collect();
        let fit = fit_beta(&series).unwrap();
        assert_relative_eq!(fit.beta, beta, max_relative = 0.03);
    }

    #[test]
    fn degenerate_series_is_rejected() {
        let series = vec![(990.0, 1.0e4), (990.0, 1.1e4), (990.0, 1.2e4)];
        assert!(matches!(
            fit_beta(&series),
            Err(BarometricError::DegenerateSeries(3))
        ));
        assert!(matches!(
            fit_beta(&series[..2]),
            Err(BarometricError::TooFewSamples(2))
        ));
    }

    #[test]
    fn linearity_of_zeta_in_offset() {
        let s = site("JSC");
        for band in EnergyBand::ALL {
            let delta = 3.25;
            let one = relative_variation(s, band, s.ref_pressure_hpa + delta).unwrap();
            let two = relative_variation(s, band, s.ref_pressure_hpa + 2.0 * delta).unwrap();
            assert_eq!(two, 2.0 * one);
        }
    }

    #[test]
    fn shipped_sites_anticorrelated_in_every_band() {
        for s in SiteCatalog::builtin().sites() {
            for band in EnergyBand::ALL {
                let low = predict_flux(s, band, s.ref_pressure_hpa - 5.0).unwrap();
                let high = predict_flux(s, band, s.ref_pressure_hpa + 5.0).unwrap();
                assert!(low.flux_m2h > high.flux_m2h, "{} {band}", s.code);
            }
        }
    }
}
