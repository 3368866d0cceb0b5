//! The site catalog: 23 exascale facilities with their geography, reference
//! pressures, band-resolved neutron fluxes and barometric coefficients.
//!
//! The catalog is the ground truth every prediction starts from. It ships
//! inside the crate as a plain CSV file with absolute values (no implicit
//! scale factors) so the numbers mean what they say; [`SiteCatalog::builtin`]
//! loads it once and caches it for the life of the process.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shipped catalog, transcribed with absolute flux values.
const BUILTIN_CSV: &str = include_str!("../data/sites.csv");

/// Canonical column order of the catalog file.
pub const CATALOG_HEADER: [&str; 19] = [
    "code",
    "name",
    "country",
    "altitude_m",
    "lat_deg",
    "lon_deg",
    "flux_all_m2h",
    "flux_all_err",
    "flux_n_m2h",
    "flux_n_err",
    "flux_mu_m2h",
    "flux_mu_err",
    "p_ref_hpa",
    "xi0_m2h",
    "beta0_per_hpa",
    "xi1_m2h",
    "beta1_per_hpa",
    "xi2_m2h",
    "beta2_per_hpa",
];

/// How far a site's reference pressure may sit from the leave-one-out
/// exponential fit of pressure vs altitude before the anti-correlation
/// check flags it.
///
/// The shipped catalog's largest excursion is ~16 hPa (CSCF in Kajaani at
/// 64°N, where the climatological mean surface pressure runs low for the
/// altitude); a genuinely inconsistent entry such as 500 hPa at sea level
/// deviates by several hundred hPa.
pub const ANTICORRELATION_TOLERANCE_HPA: f64 = 25.0;

/// Relative tolerance for the band additivity check: the mid (50..1000 MeV)
/// and high (> 1 GeV) band fluxes must sum to the full (>= 50 MeV) band.
/// The shipped catalog's worst case is 1.7% (MACC).
pub const BAND_ADDITIVITY_TOLERANCE: f64 = 0.02;

/// Bounds on the high-band to full-band flux ratio. Across the shipped
/// catalog the >1 GeV band carries 2.3%..2.7% of the full-band flux.
pub const HIGH_TO_FULL_RATIO_BOUNDS: (f64, f64) = (0.023, 0.028);

/// Neutron energy band a barometric coefficient applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyBand {
    /// Full simulated range, `E_n >= 50 MeV` (band index 0).
    Full,
    /// `50 MeV <= E_n <= 1000 MeV` (band index 1).
    Mid,
    /// `E_n > 1000 MeV` (band index 2).
    High,
}

impl EnergyBand {
    pub const ALL: [EnergyBand; 3] = [EnergyBand::Full, EnergyBand::Mid, EnergyBand::High];

    pub fn index(self) -> usize {
        match self {
            EnergyBand::Full => 0,
            EnergyBand::Mid => 1,
            EnergyBand::High => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<EnergyBand> {
        match index {
            0 => Some(EnergyBand::Full),
            1 => Some(EnergyBand::Mid),
            2 => Some(EnergyBand::High),
            _ => None,
        }
    }

    /// Human-readable energy range covered by the band.
    pub fn energy_range(self) -> &'static str {
        match self {
            EnergyBand::Full => "E_n >= 50 MeV",
            EnergyBand::Mid => "50 MeV <= E_n <= 1000 MeV",
            EnergyBand::High => "E_n > 1000 MeV",
        }
    }
}

impl fmt::Display for EnergyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "band {}", self.index())
    }
}

/// A central value with its absolute uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub uncertainty: f64,
}

/// Reference flux and barometric coefficient for one energy band at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandModel {
    pub band: EnergyBand,
    /// Reference flux in m^-2 h^-1 at the site's reference pressure.
    pub ref_flux: f64,
    /// Barometric coefficient in hPa^-1 (relative flux change per hPa).
    pub beta: f64,
}

/// One exascale facility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub code: String,
    pub name: String,
    pub country: String,
    pub altitude_m: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// All secondary particles, m^-2 h^-1.
    pub flux_all: Measurement,
    /// Neutrons with E_n >= 50 MeV, m^-2 h^-1.
    pub flux_neutron: Measurement,
    /// Muons with E_mu >= 15 MeV, m^-2 h^-1.
    pub flux_muon: Measurement,
    /// Station-level reference pressure, hPa.
    pub ref_pressure_hpa: f64,
    /// Band models indexed Full, Mid, High.
    pub bands: [BandModel; 3],
}

impl SiteRecord {
    pub fn band(&self, band: EnergyBand) -> &BandModel {
        &self.bands[band.index()]
    }
}

/// One violated invariant, reported by [`SiteCatalog::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub site_code: String,
    pub field: String,
    pub observed: String,
    pub expected: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}/{}]: observed {}, expected {}",
            self.message, self.site_code, self.field, self.observed, self.expected
        )
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("no sites")]
    Empty,
    #[error("duplicate site code {code:?} at line {line}")]
    DuplicateCode { code: String, line: u64 },
    #[error("catalog validation failed ({total} finding(s)); first: {first}")]
    Invalid { first: Box<Finding>, total: usize },
    #[error("unknown site code {code:?}; nearest: {}", nearest.join(", "))]
    NotFound { code: String, nearest: Vec<String> },
}

/// Immutable collection of site records; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCatalog {
    sites: Vec<SiteRecord>,
}

impl SiteCatalog {
    /// Parse a catalog document without validating domain invariants.
    ///
    /// Structural problems — malformed rows, unparsable numbers, a wrong
    /// header, duplicate codes, an empty document — are still errors.
    /// Intended for [`SiteCatalog::validate`]-based tooling; normal loading
    /// goes through [`SiteCatalog::load`].
    pub fn parse(document: &str) -> Result<SiteCatalog, CatalogError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(document.as_bytes());

        {
            let headers = reader.headers().map_err(|e| CatalogError::Parse {
                line: 1,
                message: e.to_string(),
            })?;
            let got: Vec<&str> = headers.iter().collect();
            if got != CATALOG_HEADER {
                return Err(CatalogError::Parse {
                    line: 1,
                    message: format!(
                        "unexpected header: got [{}], want [{}]",
                        got.join(","),
                        CATALOG_HEADER.join(",")
                    ),
                });
            }
        }

        let mut sites = Vec::new();
        let mut seen = HashSet::new();
        for result in reader.records() {
            let record = result.map_err(|e| CatalogError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_f64 = |idx: usize| -> Result<f64, CatalogError> {
                let raw = record.get(idx).unwrap_or("");
                raw.parse::<f64>().map_err(|_| CatalogError::Parse {
                    line,
                    message: format!(
                        "field {:?}: cannot parse {raw:?} as a number",
                        CATALOG_HEADER[idx]
                    ),
                })
            };
            if record.len() != CATALOG_HEADER.len() {
                return Err(CatalogError::Parse {
                    line,
                    message: format!(
                        "expected {} fields, got {}",
                        CATALOG_HEADER.len(),
                        record.len()
                    ),
                });
            }

            let code = record.get(0).unwrap_or("").to_string();
            if code.is_empty() {
                return Err(CatalogError::Parse {
                    line,
                    message: "empty site code".to_string(),
                });
            }
            if !seen.insert(code.to_ascii_uppercase()) {
                return Err(CatalogError::DuplicateCode { code, line });
            }

            let bands = [
                BandModel {
                    band: EnergyBand::Full,
                    ref_flux: parse_f64(13)?,
                    beta: parse_f64(14)?,
                },
                BandModel {
                    band: EnergyBand::Mid,
                    ref_flux: parse_f64(15)?,
                    beta: parse_f64(16)?,
                },
                BandModel {
                    band: EnergyBand::High,
                    ref_flux: parse_f64(17)?,
                    beta: parse_f64(18)?,
                },
            ];
            sites.push(SiteRecord {
                code,
                name: record.get(1).unwrap_or("").to_string(),
                country: record.get(2).unwrap_or("").to_string(),
                altitude_m: parse_f64(3)?,
                latitude_deg: parse_f64(4)?,
                longitude_deg: parse_f64(5)?,
                flux_all: Measurement {
                    value: parse_f64(6)?,
                    uncertainty: parse_f64(7)?,
                },
                flux_neutron: Measurement {
                    value: parse_f64(8)?,
                    uncertainty: parse_f64(9)?,
                },
                flux_muon: Measurement {
                    value: parse_f64(10)?,
                    uncertainty: parse_f64(11)?,
                },
                ref_pressure_hpa: parse_f64(12)?,
                bands,
            });
        }

        if sites.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(SiteCatalog { sites })
    }

    /// Parse and validate a catalog document.
    ///
    /// Any violated invariant is an error naming the site and field.
    pub fn load(document: &str) -> Result<SiteCatalog, CatalogError> {
        let catalog = SiteCatalog::parse(document)?;
        let findings = catalog.validate();
        match findings.into_iter().collect::<Vec<_>>() {
            v if v.is_empty() => Ok(catalog),
            v => Err(CatalogError::Invalid {
                total: v.len(),
                first: Box::new(v.into_iter().next().unwrap()),
            }),
        }
    }

    /// The catalog shipped with the crate, loaded once.
    pub fn builtin() -> &'static SiteCatalog {
        static BUILTIN: OnceLock<SiteCatalog> = OnceLock::new();
        BUILTIN
            .get_or_init(|| SiteCatalog::load(BUILTIN_CSV).expect("shipped catalog must validate"))
    }

    pub fn sites(&self) -> &[SiteRecord] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Case-insensitive exact lookup by site code.
    ///
    /// On a miss the error lists the three closest codes by edit distance.
    pub fn get(&self, code: &str) -> Result<&SiteRecord, CatalogError> {
        self.sites
            .iter()
            .find(|s| s.code.eq_ignore_ascii_case(code))
            .ok_or_else(|| {
                let mut scored: Vec<(usize, &str)> = self
                    .sites
                    .iter()
                    .map(|s| {
                        (
                            edit_distance(&s.code.to_ascii_uppercase(), &code.to_ascii_uppercase()),
                            s.code.as_str(),
                        )
                    })
                    .collect();
                scored.sort();
                CatalogError::NotFound {
                    code: code.to_string(),
                    nearest: scored.iter().take(3).map(|(_, c)| c.to_string()).collect(),
                }
            })
    }

    /// Check every invariant and return one finding per violation.
    ///
    /// Returns an empty list for the shipped catalog.
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        let mut push = |code: &str, field: &str, observed: String, expected: &str, msg: &str| {
            findings.push(Finding {
                site_code: code.to_string(),
                field: field.to_string(),
                observed,
                expected: expected.to_string(),
                message: msg.to_string(),
            });
        };

        for site in &self.sites {
            let code = site.code.as_str();
            if !(-100.0..=9000.0).contains(&site.altitude_m) {
                push(
                    code,
                    "altitude_m",
                    format!("{}", site.altitude_m),
                    "[-100, 9000] m",
                    "altitude out of range",
                );
            }
            if site.latitude_deg.abs() > 90.0 {
                push(
                    code,
                    "lat_deg",
                    format!("{}", site.latitude_deg),
                    "|lat| <= 90",
                    "latitude out of range",
                );
            }
            if site.longitude_deg.abs() > 180.0 {
                push(
                    code,
                    "lon_deg",
                    format!("{}", site.longitude_deg),
                    "|lon| <= 180",
                    "longitude out of range",
                );
            }
            if !(site.ref_pressure_hpa > 500.0 && site.ref_pressure_hpa < 1100.0) {
                push(
                    code,
                    "p_ref_hpa",
                    format!("{}", site.ref_pressure_hpa),
                    "(500, 1100) hPa",
                    "reference pressure out of range",
                );
            }
            for (field, m) in [
                ("flux_all", &site.flux_all),
                ("flux_n", &site.flux_neutron),
                ("flux_mu", &site.flux_muon),
            ] {
                if m.value <= 0.0 {
                    push(
                        code,
                        field,
                        format!("{}", m.value),
                        "> 0",
                        "flux must be strictly positive",
                    );
                }
                if m.uncertainty <= 0.0 {
                    push(
                        code,
                        &format!("{field}_err"),
                        format!("{}", m.uncertainty),
                        "> 0",
                        "flux uncertainty must be strictly positive",
                    );
                }
            }
            for bm in &site.bands {
                let field = format!("xi{}", bm.band.index());
                if bm.ref_flux <= 0.0 {
                    push(
                        code,
                        &field,
                        format!("{}", bm.ref_flux),
                        "> 0",
                        "reference flux must be strictly positive",
                    );
                }
                let bfield = format!("beta{}", bm.band.index());
                if bm.beta >= 0.0 {
                    push(
                        code,
                        &bfield,
                        format!("{}", bm.beta),
                        "< 0",
                        "beta must be negative",
                    );
                } else if bm.beta <= -0.02 {
                    push(
                        code,
                        &bfield,
                        format!("{}", bm.beta),
                        "(-0.02, 0) hPa^-1",
                        "beta outside plausible range",
                    );
                }
            }

            let xi0 = site.bands[0].ref_flux;
            let xi1 = site.bands[1].ref_flux;
            let xi2 = site.bands[2].ref_flux;
            if xi0 > 0.0 {
                let rel = ((xi1 + xi2) - xi0) / xi0;
                if rel.abs() > BAND_ADDITIVITY_TOLERANCE {
                    push(
                        code,
                        "xi1+xi2",
                        format!("{}", xi1 + xi2),
                        &format!(
                            "within {:.0}% of xi0 = {xi0}",
                            BAND_ADDITIVITY_TOLERANCE * 100.0
                        ),
                        "band additivity violated",
                    );
                }
                let ratio = xi2 / xi0;
                let (lo, hi) = HIGH_TO_FULL_RATIO_BOUNDS;
                if !(lo..=hi).contains(&ratio) {
                    push(
                        code,
                        "xi2/xi0",
                        format!("{ratio:.4}"),
                        &format!("[{lo}, {hi}]"),
                        "high-band to full-band flux ratio out of range",
                    );
                }
            }
        }

        findings.extend(self.anticorrelation_findings());
        findings
    }

    /// Pressure/altitude anti-correlation check.
    ///
    /// For each site, fit `ln P = q + m * altitude` over the *other* sites by
    /// least squares and compare the site's reference pressure against the
    /// fit. The fitted slope must be negative (higher site, lower pressure)
    /// and the site must sit within [`ANTICORRELATION_TOLERANCE_HPA`] of the
    /// prediction.
    fn anticorrelation_findings(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        if self.sites.len() < 3 {
            return findings;
        }
        for (i, site) in self.sites.iter().enumerate() {
            let others: Vec<(f64, f64)> = self
                .sites
                .iter()
                .enumerate()
                .filter(|(j, s)| *j != i && s.ref_pressure_hpa > 0.0)
                .map(|(_, s)| (s.altitude_m, s.ref_pressure_hpa.ln()))
                .collect();
            let Some((slope, intercept)) = linear_fit(&others) else {
                continue;
            };
            if slope >= 0.0 {
                findings.push(Finding {
                    site_code: site.code.clone(),
                    field: "p_ref_hpa".to_string(),
                    observed: format!("fit slope {slope:+.3e} per m"),
                    expected: "negative slope of ln(P) vs altitude".to_string(),
                    message: "pressure/altitude anti-correlation violated".to_string(),
                });
                continue;
            }
            let predicted = (intercept + slope * site.altitude_m).exp();
            let deviation = site.ref_pressure_hpa - predicted;
            if deviation.abs() > ANTICORRELATION_TOLERANCE_HPA {
                findings.push(Finding {
                    site_code: site.code.clone(),
                    field: "p_ref_hpa".to_string(),
                    observed: format!("{} hPa", site.ref_pressure_hpa),
                    expected: format!(
                        "{predicted:.1} ± {ANTICORRELATION_TOLERANCE_HPA} hPa (fit over remaining sites)"
                    ),
                    message: "pressure/altitude anti-correlation violated".to_string(),
                });
            }
        }
        findings
    }

    /// Short content fingerprint of the canonical serialization (FNV-1a),
    /// recorded in forecast provenance so a replay can prove it used the
    /// same coefficients.
    pub fn fingerprint(&self) -> String {
        const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = FNV_OFFSET;
        for byte in self.to_csv_string().bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
        format!("fnv1a:{hash:016x}")
    }

    /// Canonical CSV serialization: canonical header, rows in catalog order,
    /// shortest round-trip number formatting.
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(CATALOG_HEADER)
            .expect("writing to memory cannot fail");
        for s in &self.sites {
            writer
                .write_record([
                    s.code.as_str(),
                    s.name.as_str(),
                    s.country.as_str(),
                    &s.altitude_m.to_string(),
                    &s.latitude_deg.to_string(),
                    &s.longitude_deg.to_string(),
                    &s.flux_all.value.to_string(),
                    &s.flux_all.uncertainty.to_string(),
                    &s.flux_neutron.value.to_string(),
                    &s.flux_neutron.uncertainty.to_string(),
                    &s.flux_muon.value.to_string(),
                    &s.flux_muon.uncertainty.to_string(),
                    &s.ref_pressure_hpa.to_string(),
                    &s.bands[0].ref_flux.to_string(),
                    &s.bands[0].beta.to_string(),
                    &s.bands[1].ref_flux.to_string(),
                    &s.bands[1].beta.to_string(),
                    &s.bands[2].ref_flux.to_string(),
                    &s.bands[2].beta.to_string(),
                ])
                .expect("writing to memory cannot fail");
        }
        String::from_utf8(writer.into_inner().expect("writer flush")).expect("csv is utf-8")
    }
}

/// Ordinary least squares of y on x; returns (slope, intercept).
/// None when fewer than two distinct x values exist.
fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    Some((slope, mean_y - slope * mean_x))
}

/// Levenshtein distance, used to suggest near-miss site codes.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
