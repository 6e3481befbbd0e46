//! Photon emission statistics of a single nitrogen-vacancy center.
//!
//! The seven-level NV model (three ground spin states, three excited spin
//! states and the metastable singlet) is resolved by the number of photons
//! emitted so far. Each photon number `n` carries its own block of
//! populations plus the driven ground-state coherence; radiative decay moves
//! probability from block `n` to block `n + 1`. Integrating the hierarchy
//! yields the full counting distribution `P(n, t)`, from which the rest of
//! the crate derives readout error rates, Chernoff information, Mandel Q,
//! g2(tau), saturation curves and cwODMR spectra.
//!
//! Units: times in microseconds, rates in 1/us (quoted as MHz), angular
//! frequencies in rad/us, laser power in microwatts, fields in millitesla.
//!
//! # Layout
//!
//! - [`model`]: rates, drives, photon-resolved states and the generator.
//! - [`integrator`]: adaptive Dormand-Prince 5(4) with dense output.
//! - [`evolve`]: time evolution of the hierarchy with automatic cutoff growth.
//! - [`statistics`]: `P(n, t)`, moments, intensity, readout figures of merit.
//! - [`correlation`]: delay densities, renewal equation, g2 and Mandel Q.
//! - [`experiments`]: figure-level sweeps and Lorentzian fitting.
//! - [`validation`]: counting-field transform and direct steady-state solve.

pub mod correlation;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod integrator;
pub mod model;
pub mod statistics;
pub mod validation;

pub use error::{Error, Result};
pub use evolve::{evolve, suggested_cutoff, EvolveOptions};
pub use integrator::Tolerance;
pub use model::{
    initial_state, resonance_frequencies, DriveSchedule, DriveSegment, InitialState,
    PhotonResolvedState, RateSet, StateBlock,
};
pub use statistics::CountingDistribution;

/// Crate version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
