//! Simulation and analysis of cavity optomechanical systems driven by
//! narrowband fields: band-limited noise or closely spaced tone pairs at
//! either mechanical sideband.
//!
//! * [`params`]: device constants, drive descriptions, derived scalars.
//! * [`analytic`]: closed-form damping and occupancy models.
//! * [`drive`]: drive envelope synthesis.
//! * [`quasistatic`]: adiabatic Monte Carlo and time averages with capping.
//! * [`langevin`]: stochastic integration of the linearized dynamics.
//! * [`spectral`]: Welch spectra, Lorentzian fits, lineshape diagnostics.
//! * [`sweep`]: preset parameter sweeps with CSV/JSON output.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the double-precision types used by the command-line front end.

pub mod analytic;
pub mod colfile;
pub mod config;
pub mod drive;
mod error;
pub mod langevin;
pub mod params;
pub mod quasistatic;
mod real;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod sweep;

pub use error::{Error, IoError, Result};
pub use params::{DriveKind, DriveSpec, PhysParams, Sideband};
pub use real::Real;

pub type PhysParamsF64 = params::PhysParams<f64>;
pub type PhysParamsF32 = params::PhysParams<f32>;
pub type DriveSpecF64 = params::DriveSpec<f64>;
pub type EnvelopeF64 = drive::Envelope<f64>;
pub type EnvelopeF32 = drive::Envelope<f32>;
pub type SimConfigF64 = langevin::SimConfig<f64>;
pub type SimTraceF64 = langevin::SimTrace<f64>;
pub type McResultF64 = quasistatic::MCResult<f64>;
pub type PsdF64 = spectral::Psd<f64>;
pub type SpectrumFitF64 = spectral::SpectrumFit<f64>;
