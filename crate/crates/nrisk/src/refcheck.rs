//! Regression harness over the published reference examples.
//!
//! The shipped catalog comes from a published flux study whose worked
//! examples double as an end-to-end oracle: a sunny-day flux reduction at
//! Los Alamos, a thunderstorm increase at Kobe, the FIT and fleet-MTBF
//! numbers for a Titan-scale GPU fleet, and the catalog's own headline
//! extremes. `run_reference_checks` recomputes every one of them through the
//! public pipeline and reports expected vs computed; the `paper-check` CLI
//! command exits non-zero when any drifts.

use serde::Serialize;

use crate::atmosphere::{
    fit_linsley, DensityProfile, LinsleyAtmosphere, LinsleyFitConfig, ProfileSample,
};
use crate::barometric;
use crate::catalog::{EnergyBand, SiteCatalog};
use crate::reliability;

/// One reference check: expected vs computed at an absolute tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefCheck {
    pub check: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl RefCheck {
    fn new(check: &str, expected: f64, computed: f64, tolerance: f64) -> RefCheck {
        RefCheck {
            check: check.to_string(),
            expected,
            computed,
            tolerance,
            pass: (computed - expected).abs() <= tolerance,
        }
    }

    fn failed(check: &str, expected: f64, message: String) -> RefCheck {
        RefCheck {
            check: format!("{check} [{message}]"),
            expected,
            computed: f64::NAN,
            tolerance: 0.0,
            pass: false,
        }
    }
}

pub fn all_passed(checks: &[RefCheck]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Run every reference check against a catalog.
pub fn run_reference_checks(catalog: &SiteCatalog) -> Vec<RefCheck> {
    let mut checks = Vec::new();

    checks.push(RefCheck::new(
        "catalog_site_count",
        23.0,
        catalog.len() as f64,
        0.0,
    ));
    checks.push(RefCheck::new(
        "catalog_findings",
        0.0,
        catalog.validate().len() as f64,
        0.0,
    ));

    // Numeric probe of a site record: site(field) at tolerance 0.
    let site_field = |checks: &mut Vec<RefCheck>,
                      code: &str,
                      field: &str,
                      expected: f64,
                      f: &dyn Fn(&crate::catalog::SiteRecord) -> f64| {
        let name = format!("{}_{}", code.to_lowercase(), field);
        match catalog.get(code) {
            Ok(site) => checks.push(RefCheck::new(&name, expected, f(site), 0.0)),
            Err(e) => checks.push(RefCheck::failed(&name, expected, e.to_string())),
        }
    };
    site_field(&mut checks, "LANL", "altitude_m", 2125.0, &|s| s.altitude_m);
    site_field(&mut checks, "LANL", "ref_pressure_hpa", 777.0, &|s| {
        s.ref_pressure_hpa
    });
    site_field(&mut checks, "LANL", "beta0_per_hpa", -9.2e-3, &|s| {
        s.band(EnergyBand::Full).beta
    });
    // The quoted flux extremes: Guangzhou at sea level, Los Alamos at altitude.
    site_field(&mut checks, "NSCG", "flux_full_band", 3.7e4, &|s| {
        s.band(EnergyBand::Full).ref_flux
    });
    site_field(&mut checks, "LANL", "flux_full_band", 26.4e4, &|s| {
        s.band(EnergyBand::Full).ref_flux
    });

    // Sunny day at Los Alamos: P two hPa above reference.
    push_result(
        &mut checks,
        "zeta_lanl_sunny_779hpa",
        -1.84e-2,
        1e-6,
        catalog
            .get("LANL")
            .map_err(|e| e.to_string())
            .and_then(|s| {
                barometric::relative_variation(s, EnergyBand::Full, 779.0)
                    .map_err(|e| e.to_string())
            }),
    );
    // Thunderstorm preclude at Kobe: P eight hPa below reference.
    push_result(
        &mut checks,
        "zeta_rccs_storm_1002hpa",
        5.36e-2,
        1e-6,
        catalog
            .get("RCCS")
            .map_err(|e| e.to_string())
            .and_then(|s| {
                barometric::relative_variation(s, EnergyBand::Full, 1002.0)
                    .map_err(|e| e.to_string())
            }),
    );
    // Mid-band flux at Oak Ridge after a 5 hPa drop.
    push_result(
        &mut checks,
        "flux_ornl_mid_979hpa",
        48_856.5,
        0.05,
        catalog
            .get("ORNL")
            .map_err(|e| e.to_string())
            .and_then(|s| {
                barometric::predict_flux(s, EnergyBand::Mid, 979.0)
                    .map(|p| p.flux_m2h)
                    .map_err(|e| e.to_string())
            }),
    );
    // The same drop through the SDC and crash cross-sections.
    let ornl_fit = |sigma: f64| {
        catalog
            .get("ORNL")
            .map_err(|e| e.to_string())
            .and_then(|s| {
                reliability::fit_rate_at_pressure(s, EnergyBand::Mid, sigma, 979.0)
                    .map_err(|e| e.to_string())
            })
    };
    push_result(
        &mut checks,
        "fit_sdc_ornl_979hpa",
        2345.0,
        1.0,
        ornl_fit(4.8e-7),
    );
    push_result(
        &mut checks,
        "fit_crash_ornl_979hpa",
        1319.0,
        1.0,
        ornl_fit(2.7e-7),
    );
    // 18,688 GPUs at that rate: about one silent error a day.
    push_result(
        &mut checks,
        "titan_fleet_mtbf_h",
        22.8,
        0.2,
        ornl_fit(4.8e-7)
            .and_then(|fit| reliability::fleet_mtbf_hours(fit, 18_688).map_err(|e| e.to_string())),
    );

    // Standard atmosphere lands near the LANL station pressure.
    push_result(
        &mut checks,
        "std_atmosphere_pressure_2125m",
        777.0,
        15.0,
        LinsleyAtmosphere::us_standard()
            .pressure_at(2125.0)
            .map_err(|e| e.to_string()),
    );

    // A uniform +7.5% density shift moves the fitted ground pressure +7.5%.
    push_result(
        &mut checks,
        "ground_pressure_shift_for_7p5pct_density",
        1.075,
        1e-3,
        density_scaling_ratio(),
    );

    checks
}

fn push_result(
    checks: &mut Vec<RefCheck>,
    name: &str,
    expected: f64,
    tolerance: f64,
    result: Result<f64, String>,
) {
    match result {
        Ok(computed) => checks.push(RefCheck::new(name, expected, computed, tolerance)),
        Err(message) => checks.push(RefCheck::failed(name, expected, message)),
    }
}

fn density_scaling_ratio() -> Result<f64, String> {
    let source = LinsleyAtmosphere::us_standard();
    let base = source
        .sample_profile(500.0, 99_500.0, "base")
        .map_err(|e| e.to_string())?;
    let scaled = DensityProfile::new(
        "scaled",
        base.samples()
            .iter()
            .map(|s| ProfileSample {
                altitude_m: s.altitude_m,
                density_g_cm3: s.density_g_cm3 * 1.075,
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let config = LinsleyFitConfig::default();
    let p_base = fit_linsley(&base, &config)
        .map_err(|e| e.to_string())?
        .atmosphere
        .pressure_at(0.0)
        .map_err(|e| e.to_string())?;
    let p_scaled = fit_linsley(&scaled, &config)
        .map_err(|e| e.to_string())?
        .atmosphere
        .pressure_at(0.0)
        .map_err(|e| e.to_string())?;
    Ok(p_scaled / p_base)
}
