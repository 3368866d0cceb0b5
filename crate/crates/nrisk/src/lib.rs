//! Forecasting of high-energy atmospheric-neutron flux and the resulting
//! failure rates at exascale computing sites, driven by barometric pressure.
//!
//! The ground-level flux of neutrons with energies above 50 MeV is
//! anti-correlated with the local barometric pressure: a denser air column
//! absorbs more of the hadronic cascade. For each of the 23 sites in the
//! shipped catalog the relative flux variation is modelled as
//! `zeta = beta * (P - P_ref)` per neutron energy band, which converts
//! directly into failure-in-time rates (`FIT = 1e5 * flux * sigma`), MTBF
//! (`1e9 / FIT`) and checkpoint-interval recommendations.
//!
//! The crate is organised around that pipeline:
//!
//! - [`catalog`] — the site catalog (reference pressures, band fluxes,
//!   barometric coefficients) and its validation rules.
//! - [`atmosphere`] — layered atmospheric-depth models fitted to density
//!   profiles; converts altitude to depth and pressure.
//! - [`barometric`] — pressure → flux predictions and coefficient fitting.
//! - [`reliability`] — flux → FIT, MTBF, fleet MTBF and checkpoint advice.
//! - [`spectrum`] — the primary cosmic-ray power-law spectrum with the knee,
//!   used to budget expected primary counts.
//! - [`ingest`] — parsers for profile/pressure files, the live weather-feed
//!   client and the append-only forecast log.
//! - [`refcheck`] — regression harness over the published reference examples
//!   for the shipped catalog (the `paper-check` CLI command).
//! - [`service`] — the read-only HTTP API and the pressure-polling loop.
//!
//! A worked tour of the concepts lives in the mdbook guide under `book/`;
//! its code snippets are compiled and run as doc-tests (see the `guide`
//! module when building docs).

// Validation guards are written `!(x > 0.0)` so NaN fails them; the
// un-negated comparison would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmosphere;
pub mod barometric;
pub mod catalog;
pub mod cli;
pub mod ingest;
pub mod refcheck;
pub mod reliability;
pub mod service;
pub mod spectrum;

// Book chapters double as doc-tests so the guide can never drift from the
// API. Each chapter gets its own module so a failure names the chapter.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/catalog.md")]
    mod catalog {}
    #[doc = include_str!("../../../book/src/barometric-model.md")]
    mod barometric_model {}
    #[doc = include_str!("../../../book/src/reliability.md")]
    mod reliability {}
    #[doc = include_str!("../../../book/src/atmosphere.md")]
    mod atmosphere {}
    #[doc = include_str!("../../../book/src/primary-spectrum.md")]
    mod primary_spectrum {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
}
