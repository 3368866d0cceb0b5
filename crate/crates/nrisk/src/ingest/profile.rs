//! Atmospheric density profile files.
//!
//! UTF-8 text; `#`-prefixed metadata lines carry `site=` and `month=`
//! tokens; data rows are `altitude_m,density_g_cm3` with strictly ascending
//! altitudes. The canonical form is one metadata line followed by the rows
//! with shortest round-trip number formatting.
//!
//! ```text
//! # site=LANL month=2020-01
//! 0,1.05e-3
//! 1000,9.4e-4
//! ```

use thiserror::Error;

use crate::atmosphere::{AtmosphereError, DensityProfile, ProfileSample};

#[derive(Debug, Error)]
pub enum ProfileParseError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: altitudes must be strictly increasing")]
    NonMonotoneAltitude { line: usize },
    #[error("line {line}: density must be strictly positive")]
    NonPositiveDensity { line: usize },
    #[error("line {line}: density inversion beyond tolerance")]
    DensityInversion { line: usize },
    #[error("missing `site=` / `month=` metadata in any `#` line")]
    MissingMetadata,
    #[error("profile invalid: {0}")]
    Invalid(#[from] AtmosphereError),
}

/// Parse a profile document. The profile label is `"{site} {month}"`.
pub fn parse_profile(document: &str) -> Result<DensityProfile, ProfileParseError> {
    let mut site: Option<String> = None;
    let mut month: Option<String> = None;
    let mut samples = Vec::new();
    let mut lines_of_samples = Vec::new();

    for (idx, raw) in document.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            for token in meta.split_whitespace() {
                if let Some(v) = token.strip_prefix("site=") {
                    site = Some(v.to_string());
                } else if let Some(v) = token.strip_prefix("month=") {
                    month = Some(v.to_string());
                }
            }
            continue;
        }
        let mut fields = trimmed.split(',');
        let (alt_raw, rho_raw) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(r), None) => (a.trim(), r.trim()),
            _ => {
                return Err(ProfileParseError::MalformedRow {
                    line,
                    message: format!("expected `altitude_m,density_g_cm3`, got {trimmed:?}"),
                })
            }
        };
        let altitude_m: f64 = alt_raw
            .parse()
            .map_err(|_| ProfileParseError::MalformedRow {
                line,
                message: format!("cannot parse altitude {alt_raw:?}"),
            })?;
        let density_g_cm3: f64 = rho_raw
            .parse()
            .map_err(|_| ProfileParseError::MalformedRow {
                line,
                message: format!("cannot parse density {rho_raw:?}"),
            })?;
        samples.push(ProfileSample {
            altitude_m,
            density_g_cm3,
        });
        lines_of_samples.push(line);
    }

    let (site, month) = match (site, month) {
        (Some(s), Some(m)) => (s, m),
        _ => return Err(ProfileParseError::MissingMetadata),
    };

    DensityProfile::new(format!("{site} {month}"), samples).map_err(|e| match e {
        AtmosphereError::NonMonotoneAltitude { index } => ProfileParseError::NonMonotoneAltitude {
            line: lines_of_samples[index],
        },
        AtmosphereError::NonPositiveDensity { index, .. } => {
            ProfileParseError::NonPositiveDensity {
                line: lines_of_samples[index],
            }
        }
        AtmosphereError::DensityInversion { index, .. } => ProfileParseError::DensityInversion {
            line: lines_of_samples[index],
        },
        other => ProfileParseError::Invalid(other),
    })
}

/// Canonical serialization; inverse of [`parse_profile`] on canonical
/// documents. The first whitespace-separated token of the label is written
/// as `site=`, the remainder as `month=`.
pub fn serialize_profile(profile: &DensityProfile) -> String {
    let mut parts = profile.label().splitn(2, ' ');
    let site = parts.next().unwrap_or("");
    let month = parts.next().unwrap_or("");
    let mut out = format!("# site={site} month={month}\n");
    for s in profile.samples() {
        out.push_str(&format!("{},{}\n", s.altitude_m, s.density_g_cm3));
    }
    out
}
