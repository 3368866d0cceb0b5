//! Primary cosmic-ray spectrum: a piecewise power law with the knee.
//!
//! The differential flux of a primary nucleus is
//! `Phi(E) = Phi0 * (E/E0)^alpha` with `alpha ≈ -3` over most of the range,
//! steepening to `alpha ≈ -3.3` above the knee at 4.5 PeV. Integrating it
//! over energy, time, area and solid angle gives the expected number of
//! primaries impinging on a site — the budget a shower calculation has to
//! inject. The integral has a closed form per power-law branch; an adaptive
//! quadrature oracle cross-checks it in the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Default spectral index below the knee.
pub const DEFAULT_ALPHA_BELOW: f64 = -3.0;
/// Default spectral index above the knee.
pub const DEFAULT_ALPHA_ABOVE: f64 = -3.3;
/// Default knee energy, GeV (4.5 PeV).
pub const DEFAULT_KNEE_GEV: f64 = 4.5e6;

/// Kinetic-energy margin added to the rest mass for the lowest injected
/// primary energy, GeV.
pub const MIN_KINETIC_MARGIN_GEV: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("spectrum parameter out of range: {0}")]
    BadParameter(String),
    #[error("energy must be strictly positive, got {0} GeV")]
    NonPositiveEnergy(f64),
    #[error("E_max ({e_max} GeV) must exceed E_min ({e_min} GeV)")]
    EmptyEnergyRange { e_min: f64, e_max: f64 },
    #[error("integration measure must be positive: {0}")]
    NonPositiveMeasure(String),
    #[error("no species with Z = {0} (supported: 1..=26)")]
    UnknownSpecies(u32),
}

/// Piecewise power-law differential flux with a single spectral break.
///
/// Both branches share the reference normalization: the above-knee branch is
/// matched for continuity at the knee by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawSpectrum {
    /// Reference differential flux at `e0_gev` (per GeV per m^2 per s per sr).
    pub phi0: f64,
    /// Reference energy, GeV.
    pub e0_gev: f64,
    /// Spectral index below the knee (< -1).
    pub alpha_below: f64,
    /// Spectral index above the knee (< -1).
    pub alpha_above: f64,
    /// Knee energy, GeV.
    pub knee_gev: f64,
}

impl PowerLawSpectrum {
    /// Spectrum with the default indices (-3.0 / -3.3) and knee (4.5 PeV).
    pub fn new(phi0: f64, e0_gev: f64) -> Result<PowerLawSpectrum, SpectrumError> {
        PowerLawSpectrum::with_shape(
            phi0,
            e0_gev,
            DEFAULT_ALPHA_BELOW,
            DEFAULT_ALPHA_ABOVE,
            DEFAULT_KNEE_GEV,
        )
    }

    pub fn with_shape(
        phi0: f64,
        e0_gev: f64,
        alpha_below: f64,
        alpha_above: f64,
        knee_gev: f64,
    ) -> Result<PowerLawSpectrum, SpectrumError> {
        if !(phi0 > 0.0) {
            return Err(SpectrumError::BadParameter(format!("phi0 = {phi0}")));
        }
        if !(e0_gev > 0.0) {
            return Err(SpectrumError::BadParameter(format!("E0 = {e0_gev} GeV")));
        }
        if !(knee_gev > 0.0) {
            return Err(SpectrumError::BadParameter(format!(
                "knee = {knee_gev} GeV"
            )));
        }
        // Integrability at the high end requires indices below -1.
        if !(alpha_below < -1.0) || !(alpha_above < -1.0) {
            return Err(SpectrumError::BadParameter(format!(
                "spectral indices must be < -1, got {alpha_below} / {alpha_above}"
            )));
        }
        Ok(PowerLawSpectrum {
            phi0,
            e0_gev,
            alpha_below,
            alpha_above,
            knee_gev,
        })
    }

    /// Differential flux at the knee, shared by both branches.
    fn knee_flux(&self) -> f64 {
        self.phi0 * (self.knee_gev / self.e0_gev).powf(self.alpha_below)
    }

    /// Differential flux at energy `e_gev`. Strictly decreasing in energy.
    pub fn flux_at(&self, e_gev: f64) -> Result<f64, SpectrumError> {
        if !(e_gev > 0.0) {
            return Err(SpectrumError::NonPositiveEnergy(e_gev));
        }
        Ok(if e_gev <= self.knee_gev {
            self.phi0 * (e_gev / self.e0_gev).powf(self.alpha_below)
        } else {
            self.knee_flux() * (e_gev / self.knee_gev).powf(self.alpha_above)
        })
    }

    /// Closed-form `∫ Phi dE` over `[e_lo, e_hi]`, splitting at the knee
    /// when the range straddles it.
    pub fn integrate_flux(&self, e_lo: f64, e_hi: f64) -> Result<f64, SpectrumError> {
        if !(e_lo > 0.0) {
            return Err(SpectrumError::NonPositiveEnergy(e_lo));
        }
        if !(e_hi > e_lo) {
            return Err(SpectrumError::EmptyEnergyRange {
                e_min: e_lo,
                e_max: e_hi,
            });
        }
        let below =
            |lo: f64, hi: f64| branch_integral(self.phi0, self.e0_gev, self.alpha_below, lo, hi);
        let above = |lo: f64, hi: f64| {
            branch_integral(self.knee_flux(), self.knee_gev, self.alpha_above, lo, hi)
        };
        Ok(if e_hi <= self.knee_gev {
            below(e_lo, e_hi)
        } else if e_lo >= self.knee_gev {
            above(e_lo, e_hi)
        } else {
            below(e_lo, self.knee_gev) + above(self.knee_gev, e_hi)
        })
    }
}

/// `∫_lo^hi phi_ref * (E/e_ref)^alpha dE` for a single power-law branch.
fn branch_integral(phi_ref: f64, e_ref: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
    let k = alpha + 1.0;
    phi_ref * e_ref / k * ((hi / e_ref).powf(k) - (lo / e_ref).powf(k))
}

/// A primary cosmic-ray nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NucleusSpecies {
    /// Atomic number, 1..=26.
    pub z: u32,
    /// Mass number of the representative isotope.
    pub a: u32,
    /// Nuclear rest mass, GeV.
    pub mass_gev: f64,
}

const U_GEV: f64 = 0.931_494_102_42;
const ELECTRON_MASS_GEV: f64 = 0.000_510_998_95;

/// Nuclear mass from the isotope's atomic mass in u (strip the electrons;
/// electronic binding is negligible at this precision).
const fn nuclear_mass_gev(atomic_mass_u: f64, z: u32) -> f64 {
    atomic_mass_u * U_GEV - z as f64 * ELECTRON_MASS_GEV
}

macro_rules! species {
    ($z:expr, $a:expr, $m_u:expr) => {
        NucleusSpecies {
            z: $z,
            a: $a,
            mass_gev: nuclear_mass_gev($m_u, $z),
        }
    };
}

/// Most abundant isotope per element, protons through iron.
/// Atomic masses from the standard nuclide tables.
pub const SPECIES_TABLE: [NucleusSpecies; 26] = [
    species!(1, 1, 1.007_825_031_9),
    species!(2, 4, 4.002_603_254_5),
    species!(3, 7, 7.016_003_434),
    species!(4, 9, 9.012_183_062),
    species!(5, 11, 11.009_305_166),
    species!(6, 12, 12.0),
    species!(7, 14, 14.003_074_004),
    species!(8, 16, 15.994_914_619),
    species!(9, 19, 18.998_403_162),
    species!(10, 20, 19.992_440_176),
    species!(11, 23, 22.989_769_282),
    species!(12, 24, 23.985_041_697),
    species!(13, 27, 26.981_538_408),
    species!(14, 28, 27.976_926_535),
    species!(15, 31, 30.973_761_998),
    species!(16, 32, 31.972_071_174),
    species!(17, 35, 34.968_852_694),
    species!(18, 40, 39.962_383_124),
    species!(19, 39, 38.963_706_487),
    species!(20, 40, 39.962_590_866),
    species!(21, 45, 44.955_907_051),
    species!(22, 48, 47.947_940_677),
    species!(23, 51, 50.943_957_036),
    species!(24, 52, 51.940_505_624),
    species!(25, 55, 54.938_043_172),
    species!(26, 56, 55.934_935_537),
];

impl NucleusSpecies {
    /// Look up the shipped species for an atomic number.
    pub fn from_z(z: u32) -> Result<NucleusSpecies, SpectrumError> {
        if (1..=26).contains(&z) {
            Ok(SPECIES_TABLE[(z - 1) as usize])
        } else {
            Err(SpectrumError::UnknownSpecies(z))
        }
    }

    pub fn proton() -> NucleusSpecies {
        SPECIES_TABLE[0]
    }

    /// Lowest injected total energy: rest mass plus a 0.1 GeV kinetic margin.
    pub fn e_min_gev(&self) -> f64 {
        self.mass_gev + MIN_KINETIC_MARGIN_GEV
    }
}

/// Expected number of primaries of one species over an exposure.
///
/// `N = t * S * Omega * ∫_{E_min}^{E_max} Phi dE` with `E_min` from the
/// species rest mass. The solid angle enters as a plain measure; pass the
/// acceptance-weighted value if a cosine-weighted aperture is wanted.
pub fn integrate_count(
    spectrum: &PowerLawSpectrum,
    species: &NucleusSpecies,
    exposure_s: f64,
    area_m2: f64,
    solid_angle_sr: f64,
    e_max_gev: f64,
) -> Result<f64, SpectrumError> {
    for (name, v) in [("t", exposure_s), ("S", area_m2), ("Omega", solid_angle_sr)] {
        if !(v > 0.0) {
            return Err(SpectrumError::NonPositiveMeasure(format!("{name} = {v}")));
        }
    }
    let e_min = species.e_min_gev();
    if e_max_gev == e_min {
        return Ok(0.0);
    }
    if e_max_gev < e_min {
        return Err(SpectrumError::EmptyEnergyRange {
            e_min,
            e_max: e_max_gev,
        });
    }
    Ok(exposure_s * area_m2 * solid_angle_sr * spectrum.integrate_flux(e_min, e_max_gev)?)
}

/// Draw i.i.d. energies from the spectrum truncated to
/// `[E_min(species), e_max_gev]` by inverse-CDF sampling.
///
/// Deterministic for a fixed seed.
pub fn sample_energies(
    spectrum: &PowerLawSpectrum,
    species: &NucleusSpecies,
    count: usize,
    e_max_gev: f64,
    seed: u64,
) -> Result<Vec<f64>, SpectrumError> {
    let e_min = species.e_min_gev();
    if count == 0 {
        return Ok(Vec::new());
    }
    if !(e_max_gev > e_min) {
        return Err(SpectrumError::EmptyEnergyRange {
            e_min,
            e_max: e_max_gev,
        });
    }
    let total = spectrum.integrate_flux(e_min, e_max_gev)?;
    let below_share = if e_min < spectrum.knee_gev {
        spectrum.integrate_flux(e_min, e_max_gev.min(spectrum.knee_gev))?
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.gen::<f64>() * total;
        let e = if target <= below_share && e_min < spectrum.knee_gev {
            invert_branch(
                spectrum.phi0,
                spectrum.e0_gev,
                spectrum.alpha_below,
                e_min,
                target,
            )
        } else {
            let start = e_min.max(spectrum.knee_gev);
            invert_branch(
                spectrum.knee_flux(),
                spectrum.knee_gev,
                spectrum.alpha_above,
                start,
                target - below_share,
            )
        };
        out.push(e.clamp(e_min, e_max_gev));
    }
    Ok(out)
}

/// Solve `∫_lo^E phi_ref (E'/e_ref)^alpha dE' = target` for `E`.
fn invert_branch(phi_ref: f64, e_ref: f64, alpha: f64, lo: f64, target: f64) -> f64 {
    let k = alpha + 1.0;
    let base = (lo / e_ref).powf(k) + target * k / (phi_ref * e_ref);
    e_ref * base.powf(1.0 / k)
}
