//! Layered atmospheric model: density profiles, atmospheric depth and
//! barometric pressure as functions of altitude.
//!
//! The atmospheric depth `X(h)` is the mass of air above altitude `h` per
//! unit area (g cm^-2); the surface pressure is just its weight,
//! `P = g0 * X`. The model here is the classic five-layer parametrization:
//! four exponential layers `X(h) = a_i + b_i * exp(-h/c_i)` topped by a thin
//! linear layer that runs X to zero at the edge of the atmosphere. The `a_i`
//! are never free: they are derived top-down so X is continuous everywhere
//! and `X(top) = 0` exactly.
//!
//! Fitting picks `(b_i, c_i)` per layer by least squares on log-density,
//! which is closed-form and exact on data sampled from any such model.

use serde::Serialize;
use thiserror::Error;

/// Standard gravitational acceleration, m s^-2.
pub const STANDARD_GRAVITY_M_S2: f64 = 9.80665;

/// Weight of a 1 g cm^-2 column at standard gravity, in hPa.
pub const HPA_PER_G_CM2: f64 = 0.980665;

const CM_PER_M: f64 = 100.0;

/// Altitude above which density inversions are no longer plausible; below it
/// ground-layer inversions are common.
const INVERSION_CEILING_M: f64 = 100.0;

/// Relative tolerance for apparent density increases with altitude above the
/// inversion ceiling (measurement noise allowance).
const DENSITY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AtmosphereError {
    #[error("altitude {altitude_m} m outside [0, {top_m}] m")]
    AltitudeOutOfRange { altitude_m: f64, top_m: f64 },
    #[error("profile needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("profile altitudes must be strictly increasing (sample {index})")]
    NonMonotoneAltitude { index: usize },
    #[error("profile density must be strictly positive (sample {index}: {density})")]
    NonPositiveDensity { index: usize, density: f64 },
    #[error(
        "density increases with altitude beyond the {tolerance_pct}% tolerance at sample {index}"
    )]
    DensityInversion { index: usize, tolerance_pct: f64 },
    #[error("layer configuration invalid: {0}")]
    BadLayerConfig(String),
    #[error("insufficient samples in layer {layer}: {count} (need at least 2)")]
    InsufficientLayerSamples { layer: usize, count: usize },
    #[error("singular fit in layer {layer}: {reason}")]
    SingularFit { layer: usize, reason: String },
    #[error("no profiles to average")]
    EmptyAverage,
    #[error("profile {label:?} does not cover the target altitude range [{lo} m, {hi} m]")]
    NonOverlappingProfiles { label: String, lo: f64, hi: f64 },
}

/// One (altitude, density) sample of an atmospheric sounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub altitude_m: f64,
    pub density_g_cm3: f64,
}

/// A validated atmospheric density profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    label: String,
    samples: Vec<ProfileSample>,
}

impl DensityProfile {
    /// Validate and build a profile.
    ///
    /// Altitudes must be strictly increasing and densities strictly
    /// positive. Above 100 m the density must not increase by more than 1%
    /// between consecutive samples (ground inversions below that are fine).
    pub fn new(
        label: impl Into<String>,
        samples: Vec<ProfileSample>,
    ) -> Result<DensityProfile, AtmosphereError> {
        if samples.len() < 4 {
            return Err(AtmosphereError::TooFewSamples(samples.len()));
        }
        for (index, s) in samples.iter().enumerate() {
            if !(s.density_g_cm3 > 0.0) {
                return Err(AtmosphereError::NonPositiveDensity {
                    index,
                    density: s.density_g_cm3,
                });
            }
            if index > 0 {
                let prev = &samples[index - 1];
                if s.altitude_m <= prev.altitude_m {
                    return Err(AtmosphereError::NonMonotoneAltitude { index });
                }
                if prev.altitude_m > INVERSION_CEILING_M
                    && s.density_g_cm3 > prev.density_g_cm3 * (1.0 + DENSITY_TOLERANCE)
                {
                    return Err(AtmosphereError::DensityInversion {
                        index,
                        tolerance_pct: DENSITY_TOLERANCE * 100.0,
                    });
                }
            }
        }
        Ok(DensityProfile {
            label: label.into(),
            samples,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self) -> &[ProfileSample] {
        &self.samples
    }

    pub fn min_altitude_m(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.altitude_m)
    }

    pub fn max_altitude_m(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.altitude_m)
    }

    /// Density at an arbitrary altitude via linear interpolation.
    /// Altitude must lie within the sampled range.
    fn interpolate(&self, altitude_m: f64) -> Option<f64> {
        let samples = &self.samples;
        if altitude_m < samples[0].altitude_m || altitude_m > samples[samples.len() - 1].altitude_m
        {
            return None;
        }
        let idx = samples.partition_point(|s| s.altitude_m < altitude_m);
        if idx < samples.len() && samples[idx].altitude_m == altitude_m {
            return Some(samples[idx].density_g_cm3);
        }
        let hi = &samples[idx];
        let lo = &samples[idx - 1];
        let t = (altitude_m - lo.altitude_m) / (hi.altitude_m - lo.altitude_m);
        Some(lo.density_g_cm3 + t * (hi.density_g_cm3 - lo.density_g_cm3))
    }
}

/// Pointwise arithmetic mean of several profiles.
///
/// The first profile's altitude grid is the target; the others are resampled
/// onto it by linear interpolation, so every profile must cover the first
/// one's altitude span. The label records the member count and window.
pub fn monthly_average(profiles: &[DensityProfile]) -> Result<DensityProfile, AtmosphereError> {
    let first = profiles.first().ok_or(AtmosphereError::EmptyAverage)?;
    let lo = first.min_altitude_m();
    let hi = first.max_altitude_m();
    for p in &profiles[1..] {
        if p.min_altitude_m() > lo || p.max_altitude_m() < hi {
            return Err(AtmosphereError::NonOverlappingProfiles {
                label: p.label().to_string(),
                lo,
                hi,
            });
        }
    }
    let n = profiles.len() as f64;
    let samples = first
        .samples()
        .iter()
        .map(|s| {
            let sum: f64 = profiles
                .iter()
                .map(|p| p.interpolate(s.altitude_m).expect("coverage checked above"))
                .sum();
            ProfileSample {
                altitude_m: s.altitude_m,
                density_g_cm3: sum / n,
            }
        })
        .collect();
    let label = format!(
        "mean of {} profiles [{} .. {}]",
        profiles.len(),
        first.label(),
        profiles.last().map_or("", |p| p.label())
    );
    DensityProfile::new(label, samples)
}

/// Five-layer atmospheric-depth model: four exponential layers and a linear
/// top layer running X to zero at `top`.
///
/// Immutable after construction; all queries are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct LinsleyAtmosphere {
    /// Upper boundaries of the four exponential layers, cm.
    boundaries_cm: [f64; 4],
    top_cm: f64,
    /// Offsets, g cm^-2 (derived, never free).
    a: [f64; 4],
    /// Amplitudes, g cm^-2.
    b: [f64; 4],
    /// Scale heights, cm.
    c: [f64; 4],
    /// Constant density of the linear top layer, g cm^-3.
    rho_top: f64,
}

/// `(b, c)` pair of one exponential layer: amplitude in g cm^-2 and scale
/// height in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialLayer {
    pub b_g_cm2: f64,
    pub scale_height_m: f64,
}

impl LinsleyAtmosphere {
    /// Conventional layer boundaries: 4, 10, 40 and 100 km.
    pub const DEFAULT_BOUNDARIES_M: [f64; 4] = [4_000.0, 10_000.0, 40_000.0, 100_000.0];

    /// Conventional top of the atmosphere (~112.8 km), where the linear
    /// layer's depth reaches zero.
    pub const DEFAULT_TOP_M: f64 = 112_829.2;

    /// Exponential layers of the US standard atmosphere parametrization.
    const US_STANDARD_LAYERS: [ExponentialLayer; 4] = [
        ExponentialLayer {
            b_g_cm2: 1222.6562,
            scale_height_m: 9941.8638,
        },
        ExponentialLayer {
            b_g_cm2: 1144.9069,
            scale_height_m: 8781.5355,
        },
        ExponentialLayer {
            b_g_cm2: 1305.5948,
            scale_height_m: 6361.4304,
        },
        ExponentialLayer {
            b_g_cm2: 540.1778,
            scale_height_m: 7721.7016,
        },
    ];

    /// Build a model from four exponential layers.
    ///
    /// The offsets `a_i` are derived: `a_4 = 0` (the top exponential layer
    /// integrates the rest of the column), the lower offsets enforce X
    /// continuity at each boundary, and the linear layer's density is chosen
    /// so `X(top) = 0` exactly.
    pub fn from_exponential_layers(
        boundaries_m: [f64; 4],
        top_m: f64,
        layers: [ExponentialLayer; 4],
    ) -> Result<LinsleyAtmosphere, AtmosphereError> {
        for w in boundaries_m.windows(2) {
            if w[1] <= w[0] {
                return Err(AtmosphereError::BadLayerConfig(format!(
                    "boundaries must be strictly increasing, got {boundaries_m:?}"
                )));
            }
        }
        if !(boundaries_m[0] > 0.0) {
            return Err(AtmosphereError::BadLayerConfig(
                "first boundary must be positive".to_string(),
            ));
        }
        if !(top_m > boundaries_m[3]) {
            return Err(AtmosphereError::BadLayerConfig(format!(
                "top {top_m} m must lie above the last boundary {} m",
                boundaries_m[3]
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            if !(layer.b_g_cm2 > 0.0 && layer.scale_height_m > 0.0) {
                return Err(AtmosphereError::BadLayerConfig(format!(
                    "layer {i} parameters must be positive: {layer:?}"
                )));
            }
        }

        let boundaries_cm = boundaries_m.map(|h| h * CM_PER_M);
        let top_cm = top_m * CM_PER_M;
        let b = layers.map(|l| l.b_g_cm2);
        let c = layers.map(|l| l.scale_height_m * CM_PER_M);

        let mut a = [0.0; 4];
        // a[3] = 0: the top exponential layer carries the whole column above
        // its base. Walk continuity down through the boundaries.
        for i in (0..3).rev() {
            let h = boundaries_cm[i];
            a[i] = a[i + 1] + b[i + 1] * (-h / c[i + 1]).exp() - b[i] * (-h / c[i]).exp();
        }
        let depth_at_linear_base = b[3] * (-boundaries_cm[3] / c[3]).exp();
        let rho_top = depth_at_linear_base / (top_cm - boundaries_cm[3]);

        Ok(LinsleyAtmosphere {
            boundaries_cm,
            top_cm,
            a,
            b,
            c,
            rho_top,
        })
    }

    /// Single-exponential reference atmosphere: `rho(h) = rho0 * exp(-h/H)`
    /// in all four exponential layers (the offsets vanish identically, so
    /// `X(0) = rho0 * H` exactly).
    pub fn isothermal(
        rho0_g_cm3: f64,
        scale_height_m: f64,
    ) -> Result<LinsleyAtmosphere, AtmosphereError> {
        if !(rho0_g_cm3 > 0.0 && scale_height_m > 0.0) {
            return Err(AtmosphereError::BadLayerConfig(
                "isothermal parameters must be positive".to_string(),
            ));
        }
        let layer = ExponentialLayer {
            b_g_cm2: rho0_g_cm3 * scale_height_m * CM_PER_M,
            scale_height_m,
        };
        LinsleyAtmosphere::from_exponential_layers(
            Self::DEFAULT_BOUNDARIES_M,
            Self::DEFAULT_TOP_M,
            [layer; 4],
        )
    }

    /// The US standard atmosphere in this parametrization.
    pub fn us_standard() -> LinsleyAtmosphere {
        LinsleyAtmosphere::from_exponential_layers(
            Self::DEFAULT_BOUNDARIES_M,
            Self::DEFAULT_TOP_M,
            Self::US_STANDARD_LAYERS,
        )
        .expect("standard parameters are valid")
    }

    pub fn top_m(&self) -> f64 {
        self.top_cm / CM_PER_M
    }

    pub fn boundaries_m(&self) -> [f64; 4] {
        self.boundaries_cm.map(|h| h / CM_PER_M)
    }

    /// The exponential layer parameters, for diagnostics and round-trips.
    pub fn exponential_layers(&self) -> [ExponentialLayer; 4] {
        [0, 1, 2, 3].map(|i| ExponentialLayer {
            b_g_cm2: self.b[i],
            scale_height_m: self.c[i] / CM_PER_M,
        })
    }

    /// Constant density of the linear top layer, g cm^-3.
    pub fn top_layer_density_g_cm3(&self) -> f64 {
        self.rho_top
    }

    fn layer_index(&self, h_cm: f64) -> usize {
        // 0..=3 exponential, 4 linear.
        self.boundaries_cm
            .iter()
            .position(|&b| h_cm < b)
            .unwrap_or(4)
    }

    /// Atmospheric depth X(h) in g cm^-2. Strictly decreasing in altitude;
    /// zero at the top.
    pub fn depth_at(&self, altitude_m: f64) -> Result<f64, AtmosphereError> {
        let h = altitude_m * CM_PER_M;
        if !(0.0..=self.top_cm).contains(&h) {
            return Err(AtmosphereError::AltitudeOutOfRange {
                altitude_m,
                top_m: self.top_m(),
            });
        }
        let i = self.layer_index(h);
        Ok(if i < 4 {
            self.a[i] + self.b[i] * (-h / self.c[i]).exp()
        } else {
            self.rho_top * (self.top_cm - h)
        })
    }

    /// Barometric pressure at altitude, hPa: the weight of the column above,
    /// `P = g0 * X` with constant standard gravity.
    pub fn pressure_at(&self, altitude_m: f64) -> Result<f64, AtmosphereError> {
        Ok(HPA_PER_G_CM2 * self.depth_at(altitude_m)?)
    }

    /// Air density at altitude, g cm^-3 (`rho = -dX/dh`).
    pub fn density_at(&self, altitude_m: f64) -> Result<f64, AtmosphereError> {
        let h = altitude_m * CM_PER_M;
        if !(0.0..self.top_cm).contains(&h) {
            return Err(AtmosphereError::AltitudeOutOfRange {
                altitude_m,
                top_m: self.top_m(),
            });
        }
        let i = self.layer_index(h);
        Ok(if i < 4 {
            self.b[i] / self.c[i] * (-h / self.c[i]).exp()
        } else {
            self.rho_top
        })
    }

    /// Sample the model into a density profile on a regular grid,
    /// `0, step, 2*step, ..` up to `max_altitude_m`.
    pub fn sample_profile(
        &self,
        step_m: f64,
        max_altitude_m: f64,
        label: impl Into<String>,
    ) -> Result<DensityProfile, AtmosphereError> {
        if !(step_m > 0.0) || !(max_altitude_m > step_m) {
            return Err(AtmosphereError::BadLayerConfig(format!(
                "invalid sampling grid: step {step_m} m up to {max_altitude_m} m"
            )));
        }
        let mut samples = Vec::new();
        let mut h = 0.0;
        while h <= max_altitude_m && h < self.top_m() {
            samples.push(ProfileSample {
                altitude_m: h,
                density_g_cm3: self.density_at(h)?,
            });
            h += step_m;
        }
        DensityProfile::new(label, samples)
    }
}

/// Per-layer diagnostics of a [`fit_linsley`] run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerDiagnostics {
    /// Exponential layer index, 0 (ground) .. 3.
    pub layer: usize,
    /// Samples that fell into the layer.
    pub samples: usize,
    /// RMS residual of the log-density fit (0 for extension layers).
    pub residual_rms_log: f64,
    /// True when the layer lies above the sampled span and was filled in
    /// with the standard-atmosphere parameters.
    pub extrapolated: bool,
}

/// A fitted model plus its fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinsleyFit {
    pub atmosphere: LinsleyAtmosphere,
    pub layers: Vec<LayerDiagnostics>,
}

/// Boundaries and top used by [`fit_linsley`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinsleyFitConfig {
    pub boundaries_m: [f64; 4],
    pub top_m: f64,
}

impl Default for LinsleyFitConfig {
    fn default() -> Self {
        LinsleyFitConfig {
            boundaries_m: LinsleyAtmosphere::DEFAULT_BOUNDARIES_M,
            top_m: LinsleyAtmosphere::DEFAULT_TOP_M,
        }
    }
}

/// Fit a layered model to a density profile.
///
/// Within each exponential layer, `(b_i, c_i)` come from least squares on
/// log-density against altitude (exact on synthetic data). Layers entirely
/// above the sampled span fall back to the standard-atmosphere upper layers
/// and are flagged as extrapolated; layers that intersect the span need at
/// least two samples. Altitudes below the lowest sample are covered by the
/// fitted ground-layer exponential automatically.
pub fn fit_linsley(
    profile: &DensityProfile,
    config: &LinsleyFitConfig,
) -> Result<LinsleyFit, AtmosphereError> {
    let boundaries = config.boundaries_m;
    let max_sampled = profile.max_altitude_m();
    let mut layers = [LinsleyAtmosphere::US_STANDARD_LAYERS[0]; 4];
    let mut diagnostics = Vec::with_capacity(4);

    for layer in 0..4 {
        let lo = if layer == 0 {
            f64::NEG_INFINITY
        } else {
            boundaries[layer - 1]
        };
        let hi = boundaries[layer];
        if lo > max_sampled {
            // Entirely above the data: extend with the standard upper layer.
            layers[layer] = LinsleyAtmosphere::US_STANDARD_LAYERS[layer];
            diagnostics.push(LayerDiagnostics {
                layer,
                samples: 0,
                residual_rms_log: 0.0,
                extrapolated: true,
            });
            continue;
        }
        let points: Vec<(f64, f64)> = profile
            .samples()
            .iter()
            .filter(|s| s.altitude_m >= lo && s.altitude_m < hi)
            .map(|s| (s.altitude_m, s.density_g_cm3.ln()))
            .collect();
        if points.len() < 2 {
            return Err(AtmosphereError::InsufficientLayerSamples {
                layer,
                count: points.len(),
            });
        }
        let n = points.len() as f64;
        let mean_h = points.iter().map(|(h, _)| h).sum::<f64>() / n;
        let mean_l = points.iter().map(|(_, l)| l).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|(h, _)| (h - mean_h).powi(2)).sum();
        if sxx == 0.0 {
            return Err(AtmosphereError::SingularFit {
                layer,
                reason: "zero altitude variance".to_string(),
            });
        }
        let sxy: f64 = points
            .iter()
            .map(|(h, l)| (h - mean_h) * (l - mean_l))
            .sum();
        let slope = sxy / sxx;
        if slope >= 0.0 {
            return Err(AtmosphereError::SingularFit {
                layer,
                reason: format!("density does not decay with altitude (slope {slope:+.3e})"),
            });
        }
        let scale_height_m = -1.0 / slope;
        let intercept = mean_l - slope * mean_h;
        // ln rho = intercept + slope*h with rho = (b/c) exp(-h/c)
        let b_g_cm2 = scale_height_m * CM_PER_M * intercept.exp();
        layers[layer] = ExponentialLayer {
            b_g_cm2,
            scale_height_m,
        };
        let ss: f64 = points
            .iter()
            .map(|(h, l)| (l - (intercept + slope * h)).powi(2))
            .sum();
        diagnostics.push(LayerDiagnostics {
            layer,
            samples: points.len(),
            residual_rms_log: (ss / n).sqrt(),
            extrapolated: false,
        });
    }

    let atmosphere = LinsleyAtmosphere::from_exponential_layers(boundaries, config.top_m, layers)?;
    Ok(LinsleyFit {
        atmosphere,
        layers: diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Reference isothermal model used across the examples: sea-level
    /// density 1.225e-3 g cm^-3, scale height 8434 m.
    fn reference_isothermal() -> LinsleyAtmosphere {
        LinsleyAtmosphere::isothermal(1.225e-3, 8434.0).unwrap()
    }

    /// Composite Simpson quadrature of the model density over [lo, hi],
    /// split at layer boundaries so the integrand is smooth per panel.
    /// Independent of the closed-form depth expression.
    fn quadrature_depth_between(atm: &LinsleyAtmosphere, lo_m: f64, hi_m: f64) -> f64 {
        let mut cuts = vec![lo_m];
        for b in atm.boundaries_m() {
            if b > lo_m && b < hi_m {
                cuts.push(b);
            }
        }
        cuts.push(hi_m);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += simpson(|h| atm.density_at(h).unwrap(), w[0], w[1], 2000);
        }
        total * 100.0 // g cm^-3 * m -> g cm^-2
    }

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let n = panels * 2;
        let h = (hi - lo) / n as f64;
        let mut sum = f(lo) + f(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(lo + k as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn depth_vanishes_at_top() {
        for atm in [reference_isothermal(), LinsleyAtmosphere::us_standard()] {
            assert_eq!(atm.depth_at(atm.top_m()).unwrap(), 0.0);
            assert_eq!(atm.pressure_at(atm.top_m()).unwrap(), 0.0);
        }
    }

    #[test]
    fn isothermal_ground_depth_is_rho0_times_scale_height() {
        let atm = reference_isothermal();
        // rho0 * H = 1.225e-3 g/cm^3 * 843400 cm
        assert_relative_eq!(atm.depth_at(0.0).unwrap(), 1033.165, max_relative = 1e-9);
        assert_relative_eq!(
            atm.pressure_at(0.0).unwrap(),
            1013.1887547,
            max_relative = 1e-9
        );
    }

    #[test]
    fn depth_difference_matches_quadrature() {
        let atm = reference_isothermal();
        let closed = atm.depth_at(0.0).unwrap() - atm.depth_at(2125.0).unwrap();
        let numeric = quadrature_depth_between(&atm, 0.0, 2125.0);
        assert_relative_eq!(closed, numeric, max_relative = 1e-4);
    }

    #[test]
    fn depth_is_continuous_at_boundaries() {
        for atm in [reference_isothermal(), LinsleyAtmosphere::us_standard()] {
            for b in atm.boundaries_m() {
                let below = atm.depth_at(b - 1e-6).unwrap();
                let above = atm.depth_at(b + 1e-6).unwrap();
                assert!(
                    (below - above).abs() < 1e-6,
                    "X jump {} at {} m",
                    below - above,
                    b
                );
            }
            let at_top_base = atm.depth_at(atm.boundaries_m()[3]).unwrap();
            let just_below = atm.depth_at(atm.boundaries_m()[3] - 1e-6).unwrap();
            assert!((at_top_base - just_below).abs() < 1e-6);
        }
    }

    #[test]
    fn density_matches_finite_difference_of_depth() {
        let atm = LinsleyAtmosphere::us_standard();
        let delta = 0.1;
        for h in [1000.0, 2125.0, 7000.0, 25_000.0, 80_000.0, 105_000.0] {
            let fd = (atm.depth_at(h - delta).unwrap() - atm.depth_at(h + delta).unwrap())
                / (2.0 * delta * 100.0);
            let rho = atm.density_at(h).unwrap();
            assert_relative_eq!(rho, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn isothermal_ground_density_is_rho0() {
        let atm = reference_isothermal();
        assert_relative_eq!(atm.density_at(0.0).unwrap(), 1.225e-3, max_relative = 1e-12);
    }

    #[test]
    fn top_layer_density_is_tiny_and_positive() {
        let atm = LinsleyAtmosphere::us_standard();
        let eps = 1.0;
        let rho = atm.density_at(atm.top_m() - eps).unwrap();
        assert_eq!(rho, atm.top_layer_density_g_cm3());
        assert!(rho > 0.0);
        // The conventional parametrization puts the linear-layer density at
        // 1e-9 g cm^-3 (the continuity closure reproduces it to ppm).
        assert!(rho < 1.01e-9, "top layer density {rho}");
        let isothermal = reference_isothermal();
        let rho_iso = isothermal.density_at(isothermal.top_m() - eps).unwrap();
        assert!(
            rho_iso > 0.0 && rho_iso < 1e-8,
            "isothermal top density {rho_iso}"
        );
    }

    #[test]
    fn out_of_range_altitudes_error() {
        let atm = reference_isothermal();
        assert!(matches!(
            atm.depth_at(-1.0),
            Err(AtmosphereError::AltitudeOutOfRange { .. })
        ));
        assert!(atm.depth_at(atm.top_m() + 1.0).is_err());
        assert!(atm.density_at(atm.top_m()).is_err());
    }

    #[test]
    fn us_standard_ground_pressure_plausible() {
        let atm = LinsleyAtmosphere::us_standard();
        let p0 = atm.pressure_at(0.0).unwrap();
        assert!((p0 - 1016.0).abs() < 1.0, "P(0) = {p0}");
        // Station pressure at 2125 m sits near the LANL catalog reference.
        let p = atm.pressure_at(2125.0).unwrap();
        assert!((p - 777.0).abs() < 15.0, "P(2125 m) = {p}");
    }

    #[test]
    fn fit_round_trips_known_model() {
        let source = LinsleyAtmosphere::us_standard();
        let profile = source.sample_profile(250.0, 99_750.0, "synthetic").unwrap();
        let fit = fit_linsley(&profile, &LinsleyFitConfig::default()).unwrap();
        let recovered = fit.atmosphere.exponential_layers();
        let original = source.exponential_layers();
        for (r, o) in recovered.iter().zip(original.iter()) {
            assert_relative_eq!(r.b_g_cm2, o.b_g_cm2, max_relative = 1e-6);
            assert_relative_eq!(r.scale_height_m, o.scale_height_m, max_relative = 1e-6);
        }
        for d in &fit.layers {
            assert!(!d.extrapolated);
            assert!(
                d.residual_rms_log < 1e-9,
                "layer {} rms {}",
                d.layer,
                d.residual_rms_log
            );
        }
        // Refitting the fit's own samples is a fixed point.
        let resampled = fit
            .atmosphere
            .sample_profile(250.0, 99_750.0, "resampled")
            .unwrap();
        let refit = fit_linsley(&resampled, &LinsleyFitConfig::default()).unwrap();
        for (r, o) in refit
            .atmosphere
            .exponential_layers()
            .iter()
            .zip(recovered.iter())
        {
            assert_relative_eq!(r.b_g_cm2, o.b_g_cm2, max_relative = 1e-6);
            assert_relative_eq!(r.scale_height_m, o.scale_height_m, max_relative = 1e-6);
        }
    }

    #[test]
    fn fit_extends_above_data_with_standard_layers() {
        let source = LinsleyAtmosphere::us_standard();
        // Realistic sounding: ground to 35 km only.
        let profile = source.sample_profile(250.0, 35_000.0, "sounding").unwrap();
        let fit = fit_linsley(&profile, &LinsleyFitConfig::default()).unwrap();
        assert!(!fit.layers[2].extrapolated); // 10..40 km intersects the data
        assert!(fit.layers[3].extrapolated); // 40..100 km is above it
        let p = fit.atmosphere.pressure_at(0.0).unwrap();
        assert!((p - source.pressure_at(0.0).unwrap()).abs() < 1.0);
    }

    #[test]
    fn fit_rejects_single_sample_layer() {
        let source = LinsleyAtmosphere::us_standard();
        let mut samples: Vec<ProfileSample> = source
            .sample_profile(500.0, 9_500.0, "low")
            .unwrap()
            .samples()
            .to_vec();
        // One lonely sample in the 10..40 km layer.
        samples.push(ProfileSample {
            altitude_m: 20_000.0,
            density_g_cm3: source.density_at(20_000.0).unwrap(),
        });
        let profile = DensityProfile::new("gappy", samples).unwrap();
        match fit_linsley(&profile, &LinsleyFitConfig::default()) {
            Err(AtmosphereError::InsufficientLayerSamples { layer: 2, count: 1 }) => {}
            other => panic!("expected InsufficientLayerSamples, got {other:?}"),
        }
    }

    #[test]
    fn uniform_density_scaling_scales_ground_pressure() {
        let source = LinsleyAtmosphere::us_standard();
        let base = source.sample_profile(250.0, 99_750.0, "base").unwrap();
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
        .unwrap();
        let p_base = fit_linsley(&base, &LinsleyFitConfig::default())
            .unwrap()
            .atmosphere
            .pressure_at(0.0)
            .unwrap();
        let p_scaled = fit_linsley(&scaled, &LinsleyFitConfig::default())
            .unwrap()
            .atmosphere
            .pressure_at(0.0)
            .unwrap();
        assert_relative_eq!(p_scaled / p_base, 1.075, max_relative = 1e-3);
    }

    #[test]
    fn dominated_profile_fits_lower_ground_pressure() {
        // Winter vs summer: summer density reduced below 15 km, identical
        // above. The dominated (summer) profile must fit a lower ground
        // pressure.
        let source = LinsleyAtmosphere::us_standard();
        let winter = source.sample_profile(250.0, 99_750.0, "winter").unwrap();
        let summer = DensityProfile::new(
            "summer",
            winter
                .samples()
                .iter()
                .map(|s| {
                    let weight = (1.0 - s.altitude_m / 15_000.0).max(0.0);
                    ProfileSample {
                        altitude_m: s.altitude_m,
                        density_g_cm3: s.density_g_cm3 * (1.0 - 0.05 * weight),
                    }
                })
                .collect(),
        )
        .unwrap();
        let p_winter = fit_linsley(&winter, &LinsleyFitConfig::default())
            .unwrap()
            .atmosphere
            .pressure_at(0.0)
            .unwrap();
        let p_summer = fit_linsley(&summer, &LinsleyFitConfig::default())
            .unwrap()
            .atmosphere
            .pressure_at(0.0)
            .unwrap();
        assert!(p_summer < p_winter, "summer {p_summer} winter {p_winter}");
    }

    #[test]
    fn average_of_one_profile_is_identity() {
        let profile = LinsleyAtmosphere::us_standard()
            .sample_profile(1000.0, 30_000.0, "solo")
            .unwrap();
        let mean = monthly_average(std::slice::from_ref(&profile)).unwrap();
        for (a, b) in mean.samples().iter().zip(profile.samples()) {
            assert_eq!(a.density_g_cm3, b.density_g_cm3);
        }
        assert!(mean.label().contains("1 profiles"));
    }

    #[test]
    fn average_is_pointwise_linear() {
        let base = LinsleyAtmosphere::us_standard()
            .sample_profile(1000.0, 30_000.0, "rho")
            .unwrap();
        let triple = DensityProfile::new(
            "3rho",
            base.samples()
                .iter()
                .map(|s| ProfileSample {
                    altitude_m: s.altitude_m,
                    density_g_cm3: 3.0 * s.density_g_cm3,
                })
                .collect(),
        )
        .unwrap();
        let mean = monthly_average(&[base.clone(), triple]).unwrap();
        for (m, b) in mean.samples().iter().zip(base.samples()) {
            assert_relative_eq!(m.density_g_cm3, 2.0 * b.density_g_cm3, max_relative = 1e-15);
        }
    }

    #[test]
    fn average_resamples_differing_grids() {
        let source = LinsleyAtmosphere::us_standard();
        let coarse = source.sample_profile(1000.0, 30_000.0, "coarse").unwrap();
        let fine = source.sample_profile(333.0, 31_000.0, "fine").unwrap();
        let mean = monthly_average(&[coarse.clone(), fine]).unwrap();
        assert_eq!(mean.samples().len(), coarse.samples().len());
        for (m, c) in mean.samples().iter().zip(coarse.samples()) {
            // Same underlying model, so the mean stays close to the original;
            // the density jump at a layer boundary (up to ~2% at 10 km in the
            // standard parametrization) leaks into segments straddling it.
            assert_relative_eq!(m.density_g_cm3, c.density_g_cm3, max_relative = 3e-2);
        }
    }

    #[test]
    fn mean_of_twelve_profiles_preserves_ground_pressure() {
        // By linearity of the depth integral, the fitted ground pressure of
        // the mean profile equals the mean of the individual fitted ground
        // pressures.
        let source = LinsleyAtmosphere::us_standard();
        let config = LinsleyFitConfig::default();
        let mut profiles = Vec::new();
        let mut pressures = Vec::new();
        for month in 0..12 {
            // Seasonal modulation of a few percent.
            let scale = 1.0 + 0.03 * (month as f64 / 12.0 * std::f64::consts::TAU).sin();
            let profile = DensityProfile::new(
                format!("2020-{:02}", month + 1),
                source
                    .sample_profile(250.0, 99_750.0, "base")
                    .unwrap()
                    .samples()
                    .iter()
                    .map(|s| ProfileSample {
                        altitude_m: s.altitude_m,
                        density_g_cm3: s.density_g_cm3 * scale,
                    })
                    .collect(),
            )
            .unwrap();
            pressures.push(
                fit_linsley(&profile, &config)
                    .unwrap()
                    .atmosphere
                    .pressure_at(0.0)
                    .unwrap(),
            );
            profiles.push(profile);
        }
        let mean_profile = monthly_average(&profiles).unwrap();
        let p_mean = fit_linsley(&mean_profile, &config)
            .unwrap()
            .atmosphere
            .pressure_at(0.0)
            .unwrap();
        let mean_p: f64 = pressures.iter().sum::<f64>() / 12.0;
        assert!(
            (p_mean - mean_p).abs() < 0.5,
            "mean-profile pressure {p_mean} vs mean of pressures {mean_p}"
        );
    }

    #[test]
    fn average_errors() {
        assert!(matches!(
            monthly_average(&[]),
            Err(AtmosphereError::EmptyAverage)
        ));
        let a = LinsleyAtmosphere::us_standard()
            .sample_profile(1000.0, 30_000.0, "a")
            .unwrap();
        let b = DensityProfile::new(
            "b",
            (0..5)
                .map(|k| ProfileSample {
                    altitude_m: 50_000.0 + 1000.0 * k as f64,
                    density_g_cm3: 1e-6 / (k + 1) as f64,
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            monthly_average(&[a, b]),
            Err(AtmosphereError::NonOverlappingProfiles { .. })
        ));
    }

    #[test]
    fn profile_validation_rules() {
        let mk = |alts: &[f64], rhos: &[f64]| {
            DensityProfile::new(
                "t",
                alts.iter()
                    .zip(rhos)
                    .map(|(&a, &r)| ProfileSample {
                        altitude_m: a,
                        density_g_cm3: r,
                    })
                    .collect(),
            )
        };
        assert!(matches!(
            mk(&[0.0, 100.0, 200.0], &[1e-3, 9e-4, 8e-4]),
            Err(AtmosphereError::TooFewSamples(3))
        ));
        assert!(matches!(
            mk(&[0.0, 200.0, 100.0, 300.0], &[1e-3, 9e-4, 8e-4, 7e-4]),
            Err(AtmosphereError::NonMonotoneAltitude { index: 2 })
        ));
        assert!(matches!(
            mk(&[0.0, 100.0, 200.0, 300.0], &[1e-3, 9e-4, -8e-4, 7e-4]),
            Err(AtmosphereError::NonPositiveDensity { index: 2, .. })
        ));
        // 2% inversion at 3 km is rejected; the same inversion across the
        // ground layer is accepted.
        assert!(matches!(
            mk(
                &[0.0, 3000.0, 3100.0, 4000.0],
                &[1.2e-3, 9.0e-4, 9.2e-4, 8.0e-4]
            ),
            Err(AtmosphereError::DensityInversion { index: 2, .. })
        ));
        assert!(mk(
            &[0.0, 50.0, 200.0, 300.0],
            &[1.0e-3, 1.02e-3, 9.0e-4, 8.5e-4]
        )
        .is_ok());
    }
}
