//! Ingestion: file parsers, the live weather feed and the forecast log.
//!
//! Everything the toolkit consumes from outside arrives through here:
//! atmospheric density profiles, surface-pressure series, live weather
//! observations, and the append-only log of issued forecasts. Parsers are
//! total over their grammars — any byte stream produces either a value or a
//! located error, never a panic.
//!
//! The canonical internal pressure representation is *station level*: the
//! catalog's reference pressures are station values, so mean-sea-level
//! observations from weather providers are converted at the edge via
//! [`msl_to_station_pressure`] and the conversion atmosphere is recorded in
//! provenance.

pub mod forecast;
pub mod pressure;
pub mod profile;
pub mod weather;

pub use forecast::{read_log, ForecastLog, ForecastLogError, ForecastRecord, LogReplay};
pub use pressure::{
    parse_pressure_series, serialize_pressure_series, PressureKind, PressureSample,
    SeriesParseError,
};
pub use profile::{parse_profile, serialize_profile, ProfileParseError};
pub use weather::{
    fetch_current_pressure, FetchedPressure, HttpWeatherClient, RetryPolicy, TransportError,
    WeatherError, WeatherProvider,
};

use thiserror::Error;

use crate::atmosphere::{AtmosphereError, LinsleyAtmosphere};

/// Plausible window for mean-sea-level pressures, hPa (exclusive bounds).
pub const MSL_RANGE_HPA: (f64, f64) = (900.0, 1100.0);

#[derive(Debug, Error)]
pub enum ConversionError {
    #[error("mean-sea-level pressure {0} hPa outside ({}, {}) hPa", MSL_RANGE_HPA.0, MSL_RANGE_HPA.1)]
    MslOutOfRange(f64),
    #[error(transparent)]
    Atmosphere(#[from] AtmosphereError),
}

/// Reduce a mean-sea-level pressure to station level at the site altitude.
///
/// The supplied atmosphere provides the shape function:
/// `station = msl * P(h) / P(0)`. Identity at altitude zero.
pub fn msl_to_station_pressure(
    msl_hpa: f64,
    site_altitude_m: f64,
    atmosphere: &LinsleyAtmosphere,
) -> Result<f64, ConversionError> {
    let (lo, hi) = MSL_RANGE_HPA;
    if !(msl_hpa > lo && msl_hpa < hi) {
        return Err(ConversionError::MslOutOfRange(msl_hpa));
    }
    let ratio = atmosphere.pressure_at(site_altitude_m)? / atmosphere.pressure_at(0.0)?;
    Ok(msl_hpa * ratio)
}

/// Inverse of [`msl_to_station_pressure`] through the same atmosphere.
pub fn station_to_msl_pressure(
    station_hpa: f64,
    site_altitude_m: f64,
    atmosphere: &LinsleyAtmosphere,
) -> Result<f64, ConversionError> {
    let ratio = atmosphere.pressure_at(site_altitude_m)? / atmosphere.pressure_at(0.0)?;
    let msl = station_hpa / ratio;
    let (lo, hi) = MSL_RANGE_HPA;
    if !(msl > lo && msl < hi) {
        return Err(ConversionError::MslOutOfRange(msl));
    }
    Ok(msl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn isothermal() -> LinsleyAtmosphere {
        LinsleyAtmosphere::isothermal(1.225e-3, 8434.0).unwrap()
    }

    #[test]
    fn identity_at_sea_level() {
        let atm = isothermal();
        assert_eq!(msl_to_station_pressure(1013.2, 0.0, &atm).unwrap(), 1013.2);
    }

    #[test]
    fn lanl_altitude_reduction_matches_exponential() {
        let atm = isothermal();
        let station = msl_to_station_pressure(1013.2, 2125.0, &atm).unwrap();
        // Pure exponential shape: msl * exp(-h/H).
        let expected = 1013.2 * (-2125.0f64 / 8434.0).exp();
        assert_relative_eq!(station, expected, max_relative = 1e-9);
        // Lands near the LANL catalog reference of 777 hPa.
        assert!((station - 777.0).abs() < 15.0, "station = {station}");
    }

    #[test]
    fn conversion_is_linear_in_msl() {
        let atm = isothermal();
        let one = msl_to_station_pressure(1000.0, 1500.0, &atm).unwrap();
        let scaled = msl_to_station_pressure(1050.0, 1500.0, &atm).unwrap();
        assert_relative_eq!(scaled, 1.05 * one, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        let atm = isothermal();
        for h in [0.0, 250.0, 2125.0, 3000.0] {
            let station = msl_to_station_pressure(1013.2, h, &atm).unwrap();
            let back = station_to_msl_pressure(station, h, &atm).unwrap();
            assert_relative_eq!(back, 1013.2, max_relative = 1e-10);
        }
    }

    #[test]
    fn out_of_range_msl_rejected() {
        let atm = isothermal();
        assert!(matches!(
            msl_to_station_pressure(890.0, 0.0, &atm),
            Err(ConversionError::MslOutOfRange(_))
        ));
        assert!(msl_to_station_pressure(1100.0, 0.0, &atm).is_err());
        assert!(msl_to_station_pressure(1013.0, -5.0, &atm).is_err());
    }
}
