use serde::Serialize;

use super::fit::{lorentzian, SpectrumFit};
use super::psd::Psd;
use crate::error::{invalid, Result};
use crate::real::Real;

/// How far a spectrum departs from its Lorentzian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineshapeDiagnostics<T> {
    /// Mean squared residual in units of the expected Welch variance
    /// `model^2 / K_eq`. About 1 for a Lorentzian process, larger for
    /// distorted lineshapes. Zero for a noiseless Lorentzian.
    pub score: T,
    /// Standard deviation of `score` expected for a Lorentzian process.
    pub score_spread: T,
    /// Baseline-subtracted power within `±fwhm/2` of the centre, divided by
    /// half the fitted area. 1 for a Lorentzian; below 1 for flat-topped or
    /// broad-winged peaks, above 1 for cusped ones.
    pub peak_index: T,
    /// `score` exceeds `1 + 4 score_spread`.
    pub distorted: bool,
}

pub fn lineshape_diagnostics<T: Real>(psd: &Psd<T>, fit: &SpectrumFit<T>) -> Result<LineshapeDiagnostics<T>> {
    if !fit.converged {
        return Err(invalid("fit", "diagnostics need a converged fit"));
    }
    if psd.is_empty() {
        return Err(invalid("psd", "empty spectrum"));
    }
    let k = psd.equivalent_segments.max(T::one());
    let mut chi2 = T::zero();
    let mut core = T::zero();
    let half_width = fit.fwhm / T::lit(2.0);
    for (&f, &v) in psd.frequencies.iter().zip(&psd.values) {
        let m = lorentzian(f, fit.center, fit.fwhm, fit.area, fit.baseline);
        if m > T::zero() {
            let r = (v - m) / m;
            chi2 += r * r * k;
        }
        // fraction of the bin [f - df/2, f + df/2] inside the core interval
        let lo = (f - psd.df / T::lit(2.0)).max(fit.center - half_width);
        let hi = (f + psd.df / T::lit(2.0)).min(fit.center + half_width);
        if hi > lo {
            core += (v - fit.baseline) * (hi - lo);
        }
    }
    let n = T::from_count(psd.len());
    let score = chi2 / n;
    let score_spread = (T::lit(2.0) / n).sqrt();
    Ok(LineshapeDiagnostics {
        score,
        score_spread,
        peak_index: core / (fit.area / T::lit(2.0)),
        distorted: score > T::one() + T::lit(4.0) * score_spread,
    })
}
