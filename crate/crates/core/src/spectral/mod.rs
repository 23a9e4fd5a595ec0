//! Spectral estimation and lineshape fitting for simulated traces.

mod diagnostics;
mod fit;
mod psd;

pub use diagnostics::{lineshape_diagnostics, LineshapeDiagnostics};
pub use fit::{lorentzian, lorentzian_fit, FitInit, SpectrumFit, MAX_ITERATIONS, PARAM_TOLERANCE};
pub use psd::{periodogram, welch_psd, Psd, Window};
