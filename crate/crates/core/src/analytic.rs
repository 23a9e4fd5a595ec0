//! Closed-form backaction and occupancy models.
//!
//! All methods hang off [`AnalyticModel`], which refuses parameter sets
//! outside the resolved-sideband regime. Where a model predicts an
//! instability the occupancy is reported as `n_max`, never infinity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{PhysParams, Sideband};
use crate::real::Real;
use crate::special::exp_e1;

/// Which closed form produced an [`OccupancyPrediction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    /// Single coherent tone, linear backaction.
    Coherent,
    /// Broadband noise in the quantum-noise approach.
    NoiseQna,
    /// Narrowband blue noise with capped unstable excursions.
    BlueNoiseNarrow,
    /// Two closely spaced tones, adiabatic average.
    TwoToneNarrow,
    /// Red two-tone, strong-damping approximation.
    TwoToneStrongDamping,
    /// Rayleigh-weighted quasi-static average.
    QuasiStatic,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Coherent => "coherent",
            ModelTag::NoiseQna => "noise_qna",
            ModelTag::BlueNoiseNarrow => "blue_noise_narrow",
            ModelTag::TwoToneNarrow => "two_tone_narrow",
            ModelTag::TwoToneStrongDamping => "two_tone_strong_damping",
            ModelTag::QuasiStatic => "quasi_static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyPrediction<T> {
    pub n_m: T,
    /// Effective mechanical damping, rad/s.
    pub gamma_eff: T,
    pub stable: bool,
    pub model: ModelTag,
}

/// Evaluates the closed-form models for one device.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticModel<'a, T> {
    p: &'a PhysParams<T>,
}

impl<'a, T: Real> AnalyticModel<'a, T> {
    pub fn new(p: &'a PhysParams<T>) -> Result<Self> {
        p.validate()?;
        p.require_resolved()?;
        Ok(AnalyticModel { p })
    }

    /// Skips the sideband-resolution check (for reporting on bad configs).
    pub fn unchecked(p: &'a PhysParams<T>) -> Self {
        AnalyticModel { p }
    }

    pub fn params(&self) -> &PhysParams<T> {
        self.p
    }

    /// Signed optical damping of a coherent tone: `±4 g0^2 n0 / kappa`.
    pub fn backaction_damping_coherent(&self, sideband: Sideband, n0: T) -> T {
        sideband.sign::<T>() * self.p.gamma_opt_bar(n0)
    }

    /// Steady occupancy under a signed optical damping `gamma_opt`:
    /// `(gamma n_th + gamma_opt n_ba) / (gamma + gamma_opt)`, capped at
    /// `n_max`.
    pub fn occupancy_coherent(&self, gamma_opt: T) -> OccupancyPrediction<T> {
        self.linear_occupancy(gamma_opt, ModelTag::Coherent)
    }

    fn linear_occupancy(&self, gamma_opt: T, model: ModelTag) -> OccupancyPrediction<T> {
        let p = self.p;
        let gamma_eff = p.gamma + gamma_opt;
        let stable = gamma_eff > T::zero();
        let n_m = if stable {
            ((p.gamma * p.n_th + gamma_opt * p.n_ba) / gamma_eff).min(p.n_max)
        } else {
            p.n_max
        };
        OccupancyPrediction {
            n_m,
            gamma_eff,
            stable,
            model,
        }
    }

    /// Signed optical damping of box noise of width `sigma` and flux `flux`
    /// in the quantum-noise approach:
    /// `±(4 g0^2 F0 / omega_m^2) (kappa/sigma) atan(sigma/kappa)`.
    pub fn noise_damping_qna(&self, sideband: Sideband, flux: T, sigma: T) -> T {
        let p = self.p;
        let narrow = T::lit(4.0) * p.g0 * p.g0 * flux / (p.omega_m * p.omega_m);
        let s = sigma / p.kappa;
        // atan(s)/s, with its Taylor form where s is tiny
        let shape = if s < T::lit(1e-4) {
            T::one() - s * s / T::lit(3.0)
        } else {
            s.atan() / s
        };
        sideband.sign::<T>() * narrow * shape
    }

    /// Occupancy predicted by the quantum-noise approach for box noise.
    pub fn occupancy_noise_qna(&self, sideband: Sideband, flux: T, sigma: T) -> OccupancyPrediction<T> {
        self.linear_occupancy(self.noise_damping_qna(sideband, flux, sigma), ModelTag::NoiseQna)
    }

    /// Fraction of time a narrowband blue-noise drive holds the oscillator
    /// past threshold: `exp(-gamma omega_m^2 / (4 g0^2 F0))`.
    pub fn unstable_probability(&self, flux: T) -> T {
        let p = self.p;
        let rate = T::lit(4.0) * p.g0 * p.g0 * flux;
        if rate <= T::zero() {
            return T::zero();
        }
        (-(p.gamma * p.omega_m * p.omega_m) / rate).exp()
    }

    /// `n_th + n_max exp(-gamma/gamma_opt)` for narrowband blue noise.
    ///
    /// `stable` is true only when no excursion past threshold can occur
    /// (zero flux or zero coupling).
    pub fn occupancy_blue_noise_narrow(&self, flux: T) -> OccupancyPrediction<T> {
        let p = self.p;
        let prob = self.unstable_probability(flux);
        let gamma_opt = p.gamma_opt_bar(p.nbar0_from_flux(flux));
        OccupancyPrediction {
            n_m: p.n_th + p.n_max * prob,
            gamma_eff: p.gamma - gamma_opt,
            stable: prob == T::zero(),
            model: ModelTag::BlueNoiseNarrow,
        }
    }

    /// Narrow-spacing two-tone occupancy, as printed:
    /// `gamma n_th kappa / sqrt(gamma kappa (gamma kappa ∓ 8 g0^2 nbar0))`,
    /// `-` for blue, `+` for red. Blue drives with `8 g0^2 nbar0 >= gamma kappa`
    /// are unstable and report `n_max`.
    pub fn occupancy_two_tone_narrow(&self, sideband: Sideband, nbar0: T) -> OccupancyPrediction<T> {
        let p = self.p;
        let gk = p.gamma * p.kappa;
        let drive = T::lit(8.0) * p.g0 * p.g0 * nbar0;
        let inner = gk + sideband.sign::<T>() * drive;
        let gamma_eff = p.gamma + self.backaction_damping_coherent(sideband, nbar0);
        if inner <= T::zero() {
            return OccupancyPrediction {
                n_m: p.n_max,
                gamma_eff,
                stable: false,
                model: ModelTag::TwoToneNarrow,
            };
        }
        OccupancyPrediction {
            n_m: (p.gamma * p.n_th * p.kappa / (gk * inner).sqrt()).min(p.n_max),
            gamma_eff,
            stable: true,
            model: ModelTag::TwoToneNarrow,
        }
    }

    /// Red two-tone strong-damping form `n_th sqrt(gamma / (2 gamma_opt))`.
    pub fn occupancy_two_tone_red_strong_damping(&self, nbar0: T) -> OccupancyPrediction<T> {
        let p = self.p;
        let gamma_opt = p.gamma_opt_bar(nbar0);
        OccupancyPrediction {
            n_m: (p.n_th * (p.gamma / (T::lit(2.0) * gamma_opt)).sqrt()).min(p.n_max),
            gamma_eff: p.gamma + gamma_opt,
            stable: true,
            model: ModelTag::TwoToneStrongDamping,
        }
    }

    /// Exact period average of `n_th / (1 + q r^2)` over the two-tone
    /// envelope `r = 2 alpha_in cos(delta t / 2)`:
    /// `n_th / sqrt(1 + 4 q alpha_in^2)`.
    ///
    /// Blue drives whose peak pushes `1 + q r^2` through zero report `n_max`.
    pub fn two_tone_envelope_average(&self, sideband: Sideband, alpha_in: T) -> OccupancyPrediction<T> {
        let p = self.p;
        let a = T::lit(4.0) * p.q_parameter(sideband) * alpha_in * alpha_in;
        let nbar0 = p.nbar0_from_flux(T::lit(2.0) * alpha_in * alpha_in);
        let gamma_eff = p.gamma + self.backaction_damping_coherent(sideband, nbar0);
        let stable = T::one() + a > T::zero();
        OccupancyPrediction {
            n_m: if stable {
                (p.n_th / (T::one() + a).sqrt()).min(p.n_max)
            } else {
                p.n_max
            },
            gamma_eff,
            stable,
            model: ModelTag::QuasiStatic,
        }
    }

    /// Compares the printed narrow-spacing formula against the exact
    /// envelope average for tones of amplitude `alpha_in`.
    pub fn two_tone_convention_check(&self, sideband: Sideband, alpha_in: T) -> TwoToneConventionCheck<T> {
        let p = self.p;
        let single = p.nbar0_from_flux(alpha_in * alpha_in);
        let both = T::lit(2.0) * single;
        let printed_single = self.occupancy_two_tone_narrow(sideband, single).n_m;
        let printed_both = self.occupancy_two_tone_narrow(sideband, both).n_m;
        let envelope = self.two_tone_envelope_average(sideband, alpha_in).n_m;
        TwoToneConventionCheck {
            nbar0_single_tone: single,
            nbar0_both_tones: both,
            printed_single_tone: printed_single,
            printed_both_tones: printed_both,
            envelope_average: envelope,
            coupling_factor: T::lit(2.0),
        }
    }

    /// Rayleigh-weighted quasi-static average for `q > 0`:
    /// `n_th x e^x E1(x)` with `x = 1/(q F0)`.
    pub fn quasistatic_occupancy_closed_form(&self, q: T, flux: T) -> Result<T> {
        if !(q > T::zero()) {
            return Err(Error::NonPositiveTransduction(q.as_f64()));
        }
        let c = q * flux;
        if c <= T::zero() {
            return Ok(self.p.n_th);
        }
        let x = c.recip();
        Ok(self.p.n_th * x * exp_e1(x))
    }

    /// Coherent blue-tone photon number where damping vanishes:
    /// `gamma kappa / (4 g0^2)`.
    pub fn self_oscillation_threshold_photons(&self) -> T {
        let p = self.p;
        p.gamma * p.kappa / (T::lit(4.0) * p.g0 * p.g0)
    }
}

/// Outcome of [`AnalyticModel::two_tone_convention_check`].
///
/// The printed narrow-spacing formula counts the photon number of one tone;
/// averaging the two-tone envelope reproduces it only when `nbar0` counts
/// both tones, i.e. the drive coupling differs by `coupling_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoToneConventionCheck<T> {
    pub nbar0_single_tone: T,
    pub nbar0_both_tones: T,
    pub printed_single_tone: T,
    pub printed_both_tones: T,
    pub envelope_average: T,
    pub coupling_factor: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn paper() -> PhysParams<f64> {
        PhysParams::paper_device()
    }

    #[test]
    fn rejects_unresolved() {
        let p = PhysParams::new(1.0, 1e-3, 2.0, 1e-3, 1.0, None, 1e6).unwrap();
        assert!(AnalyticModel::new(&p).is_err());
    }

    #[test]
    fn coherent_damping() {
        let p = paper();
        let m = AnalyticModel::new(&p).unwrap();
        assert_eq!(m.backaction_damping_coherent(Sideband::Red, 0.0), 0.0);
        let red = m.backaction_damping_coherent(Sideband::Red, 1e4) / TAU;
        assert!(rel(red, 57.4) < 1e-3, "{red}");
        assert_eq!(
            m.backaction_damping_coherent(Sideband::Blue, 1e4),
            -m.backaction_damping_coherent(Sideband::Red, 1e4)
        );
    }

    #[test]
    fn coherent_occupancy() {
        let mut p = PhysParams::new(TAU * 9.22e6, TAU * 120.0, TAU * 1.06e6, TAU * 39.0, 100.0, Some(0.0), 1e10).unwrap();
        let m = AnalyticModel::new(&p).unwrap();
        let o = m.occupancy_coherent(0.0);
        assert_eq!(o.n_m, 100.0);
        assert!(o.stable);

        let o = m.occupancy_coherent(-TAU * 57.4);
        assert!(o.stable);
        assert!(rel(o.n_m, 120.0 * 100.0 / 62.6) < 1e-12, "{}", o.n_m);
        assert!((o.n_m - 191.7).abs() < 0.05);

        let o = m.occupancy_coherent(-p.gamma);
        assert!(!o.stable);
        assert_eq!(o.n_m, 1e10);

        p.n_ba = 0.5;
        let m = AnalyticModel::new(&p).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let n = m.occupancy_coherent(k as f64 * p.gamma / 7.0).n_m;
            assert!(n < last);
            last = n;
        }
    }

    #[test]
    fn qna_limits() {
        let p = paper();
        let m = AnalyticModel::new(&p).unwrap();
        let flux = 1e12;
        let narrow = p.gamma_opt_bar(p.nbar0_from_flux(flux));
        let r = m.noise_damping_qna(Sideband::Red, flux, 1e-3 * p.kappa) / narrow;
        assert!((r - (1.0 - 1e-6 / 3.0)).abs() < 1e-12, "{r}");
        let r = m.noise_damping_qna(Sideband::Red, flux, p.kappa) / narrow;
        assert!((r - PI / 4.0).abs() < 1e-12);
        assert_eq!(m.noise_damping_qna(Sideband::Red, 0.0, p.kappa), 0.0);
        assert_eq!(
            m.noise_damping_qna(Sideband::Blue, flux, p.kappa),
            -m.noise_damping_qna(Sideband::Red, flux, p.kappa)
        );
    }

    #[test]
    fn unstable_probability_examples() {
        let p = paper();
        let m = AnalyticModel::new(&p).unwrap();
        let flux_at_threshold = p.gamma * p.omega_m * p.omega_m / (4.0 * p.g0 * p.g0);
        assert!(rel(flux_at_threshold, 1.053e13) < 5e-3);
        assert!(rel(m.unstable_probability(flux_at_threshold), (-1.0f64).exp()) < 1e-12);
        assert!(rel(m.unstable_probability(flux_at_threshold / 2.0), (-2.0f64).exp()) < 1e-12);
        assert_eq!(m.unstable_probability(0.0), 0.0);
        let mut last = 0.0;
        for k in 1..40 {
            let pr = m.unstable_probability(k as f64 * flux_at_threshold / 5.0);
            assert!(pr > last && pr < 1.0);
            last = pr;
        }
    }

    #[test]
    fn blue_noise_narrow_occupancy() {
        let p = PhysParams::paper_device_probe();
        let m = AnalyticModel::new(&p).unwrap();
        assert_eq!(m.occupancy_blue_noise_narrow(0.0).n_m, 12.1);
        let half = p.flux_from_nbar0(p.nbar0_for_gamma_opt(p.gamma / 2.0));
        let n = m.occupancy_blue_noise_narrow(half).n_m;
        assert!(rel(n, 12.1 + 1e10 * (-2.0f64).exp()) < 1e-12);
        assert!(rel(n, 1.353e9) < 1e-3);
        let huge = m.occupancy_blue_noise_narrow(1e40).n_m;
        assert!(rel(huge, 12.1 + 1e10) < 1e-9);
    }

    #[test]
    fn two_tone_narrow() {
        let p = PhysParams::scaled();
        let m = AnalyticModel::new(&p).unwrap();
        let gk = p.gamma * p.kappa;
        let per_photon = 8.0 * p.g0 * p.g0;
        for sb in [Sideband::Red, Sideband::Blue] {
            assert_eq!(m.occupancy_two_tone_narrow(sb, 0.0).n_m, p.n_th);
        }
        let blue = m.occupancy_two_tone_narrow(Sideband::Blue, 0.5 * gk / per_photon);
        assert!(rel(blue.n_m, p.n_th * 2f64.sqrt()) < 1e-12);
        let red = m.occupancy_two_tone_narrow(Sideband::Red, 99.0 * gk / per_photon);
        assert!(rel(red.n_m, p.n_th / 10.0) < 1e-12);
        let approx = m.occupancy_two_tone_red_strong_damping(99.0 * gk / per_photon);
        assert!(rel(approx.n_m, p.n_th / 99f64.sqrt()) < 1e-12);

        let over = m.occupancy_two_tone_narrow(Sideband::Blue, gk / per_photon);
        assert!(!over.stable);
        assert_eq!(over.n_m, p.n_max);
    }

    #[test]
    fn two_tone_forms_agree_in_strong_damping() {
        let p = PhysParams::scaled();
        let m = AnalyticModel::new(&p).unwrap();
        for ratio in [20.0, 50.0, 200.0, 1e4] {
            let nbar0 = p.nbar0_for_gamma_opt(ratio * p.gamma / 2.0);
            let exact = m.occupancy_two_tone_narrow(Sideband::Red, nbar0).n_m;
            let approx = m.occupancy_two_tone_red_strong_damping(nbar0).n_m;
            assert!(rel(approx, exact) < 0.05, "{ratio}: {approx} vs {exact}");
        }
    }

    #[test]
    fn convention_check_reports_factor_two() {
        let p = PhysParams::scaled();
        let m = AnalyticModel::new(&p).unwrap();
        let alpha = 3.0;
        let c = m.two_tone_convention_check(Sideband::Red, alpha);
        assert!(rel(c.envelope_average, c.printed_both_tones) < 1e-12);
        assert!(c.printed_single_tone > c.envelope_average);
        assert_eq!(c.coupling_factor, 2.0);
    }

    #[test]
    fn closed_form_spot_values() {
        let p = PhysParams::scaled();
        let m = AnalyticModel::new(&p).unwrap();
        let q = 2.0;
        let n = m.quasistatic_occupancy_closed_form(q, 10.0 / q).unwrap() / p.n_th;
        assert!((n - 0.20147).abs() < 1e-5, "{n}");
        let n = m.quasistatic_occupancy_closed_form(q, 1.0 / q).unwrap() / p.n_th;
        assert!((n - 0.59635).abs() < 1e-5, "{n}");
        let n = m.quasistatic_occupancy_closed_form(q, 1e-12).unwrap() / p.n_th;
        assert!((n - 1.0).abs() < 1e-9);
        assert_eq!(m.quasistatic_occupancy_closed_form(q, 0.0).unwrap(), p.n_th);
        assert!(matches!(
            m.quasistatic_occupancy_closed_form(-1.0, 1.0),
            Err(Error::NonPositiveTransduction(_))
        ));
    }

    #[test]
    fn threshold_scaling() {
        let p = paper();
        let m = AnalyticModel::new(&p).unwrap();
        let n = m.self_oscillation_threshold_photons();
        assert!(rel(n, 2.09e4) < 5e-3, "{n}");
        let mut g2 = p;
        g2.g0 *= 2.0;
        assert!(rel(AnalyticModel::new(&g2).unwrap().self_oscillation_threshold_photons(), n / 4.0) < 1e-14);
        let mut gg = p;
        gg.gamma *= 2.0;
        assert!(rel(AnalyticModel::new(&gg).unwrap().self_oscillation_threshold_photons(), 2.0 * n) < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let p = PhysParams::scaled().cast::<f32>();
        let m = AnalyticModel::new(&p).unwrap();
        assert!((m.self_oscillation_threshold_photons() - 250.0).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn qna_reduces_to_narrow_limit(
                wm in 1e4..1e9f64, k_frac in 1e-3..0.9f64, g0 in 0.1..100.0f64,
                flux in 1.0..1e15f64, s in 1e-9..1e-3f64,
            ) {
                let p = PhysParams::new(wm, 1.0, k_frac * wm, g0, 1.0, None, 1e10).unwrap();
                let m = AnalyticModel::new(&p).unwrap();
                let r = m.noise_damping_qna(Sideband::Red, flux, s * p.kappa)
                    / p.gamma_opt_bar(p.nbar0_from_flux(flux));
                prop_assert!((r - 1.0).abs() < 1e-6);
            }
        }
    }
}
