//! Time-domain integration of the linearized optomechanical equations in
//! the rotating-wave approximation.
//!
//! Three fields are propagated:
//!
//! * `alpha`: classical intracavity drive amplitude, frame of the drive
//!   band centre, `d alpha/dt = (i Δ - κ/2) alpha + sqrt(κ) r(t)` with
//!   `Δ = -ω_m` (red) or `+ω_m` (blue);
//! * `a`: cavity fluctuation, frame of the cavity;
//! * `b`: mechanical amplitude, frame of `ω_m`.
//!
//! Red drives couple `a` and `b` through the beam-splitter term
//! `-i g0 alpha b` / `-i g0 alpha* a`; blue drives through the parametric
//! term `-i g0 alpha b*` / `-i g0 alpha a*`. Noise follows the symmetrized
//! convention: the cavity sees vacuum (`<|a|^2> = 1/2` undriven) and the
//! mechanics a bath with `<|b|^2> = n_th + 1/2`. Reported occupancy is
//! `|b|^2 - 1/2`.
//!
//! Each step applies the exact exponential of the linear drift (a closed
//! 2x2 form) and adds Gaussian increments whose variance is exact for the
//! undriven modes. The drive field is advanced exactly for an envelope held
//! at its step-average, so the fast detuning `ω_m` never limits the step.

use log::warn;
use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::AnalyticModel;
use crate::drive::{envelope_step, synthesize, Envelope};
use crate::error::{invalid, Error, Result};
use crate::params::{DriveKind, DriveSpec, PhysParams, Sideband};
use crate::real::Real;
use crate::rng::{complex_normal, derive_seed, stream_rng};

/// Largest accepted `dt * kappa`.
pub const MAX_KAPPA_STEP: f64 = 0.1;
/// Largest accepted `dt * Δ_sb` for the envelope band edge.
pub const MAX_DETUNING_STEP: f64 = 0.2;

/// Limit on self-oscillation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Saturation<T> {
    None,
    /// Mechanical damping becomes `gamma (1 + n/n_max)`.
    NonlinearDamping { n_max: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig<T> {
    /// Integration step, s.
    pub dt: T,
    /// Simulated time, s.
    pub duration: T,
    /// Time discarded before averaging, s.
    pub transient_skip: T,
    pub seed: u64,
    pub saturation: Saturation<T>,
    /// Keep every `record_stride`-th state in the trace.
    pub record_stride: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, duration: T, transient_skip: T, seed: u64) -> Self {
        SimConfig {
            dt,
            duration,
            transient_skip,
            seed,
            saturation: Saturation::None,
            record_stride: 1,
        }
    }

    pub fn with_saturation(mut self, n_max: T) -> Self {
        self.saturation = Saturation::NonlinearDamping { n_max };
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    fn validate(&self, p: &PhysParams<T>, band_edge: T) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration > self.dt) {
            return Err(invalid("duration", format!("must exceed dt, got {}", self.duration)));
        }
        if self.transient_skip < T::zero() || self.transient_skip >= self.duration {
            return Err(invalid("transient_skip", "must lie in [0, duration)"));
        }
        let k = self.dt * p.kappa;
        if k > T::lit(MAX_KAPPA_STEP) {
            return Err(Error::Unresolved {
                what: "dt * kappa",
                value: k.as_f64(),
                limit: MAX_KAPPA_STEP,
            });
        }
        let d = self.dt * band_edge;
        if d > T::lit(MAX_DETUNING_STEP) {
            return Err(Error::Unresolved {
                what: "dt * envelope detuning",
                value: d.as_f64(),
                limit: MAX_DETUNING_STEP,
            });
        }
        if let Saturation::NonlinearDamping { n_max } = self.saturation {
            if !(n_max > T::zero()) {
                return Err(invalid("n_max", "saturation level must be > 0"));
            }
        }
        Ok(())
    }
}

/// Recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace<T> {
    /// Spacing of recorded samples, s (integration step times stride).
    pub dt: T,
    /// Mechanical amplitude, sqrt(phonons).
    pub b: Vec<Complex<T>>,
    /// Cavity fluctuation, sqrt(photons).
    pub a: Vec<Complex<T>>,
    /// Classical intracavity drive amplitude, sqrt(photons).
    pub alpha: Vec<Complex<T>>,
    /// Linear-response damping estimate used for error bars, rad/s.
    pub gamma_eff: T,
    pub spec: DriveSpec<T>,
    pub seed: u64,
}

impl<T: Real> SimTrace<T> {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// `|b|^2 - 1/2` per recorded sample.
    pub fn occupancy(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.b.iter().map(|z| z.norm_sqr() - half).collect()
    }

    /// Recorded sample index at or after time `t`.
    pub fn index_at(&self, t: T) -> usize {
        if t <= T::zero() {
            0
        } else {
            (t / self.dt).ceil().to_usize().unwrap_or(usize::MAX)
        }
    }
}

/// A drive given either by description or by an explicit waveform.
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a, T> {
    Spec(DriveSpec<T>),
    Envelope(&'a Envelope<T>),
}

/// Damping estimate from the closed-form models, floored at `gamma/10`.
fn linear_gamma_eff<T: Real>(p: &PhysParams<T>, spec: &DriveSpec<T>) -> T {
    let m = AnalyticModel::unchecked(p);
    let opt = match spec.kind {
        DriveKind::CoherentTone { n0 } => m.backaction_damping_coherent(spec.sideband, n0),
        DriveKind::BoxNoise { sigma, flux } => m.noise_damping_qna(spec.sideband, flux, sigma),
        DriveKind::TwoTone { .. } => m.backaction_damping_coherent(spec.sideband, spec.nbar0(p)),
    };
    (p.gamma + opt).max(p.gamma / T::lit(10.0))
}

/// Integrates the linearized equations under `drive`.
///
/// Box-noise descriptions are synthesized with seed
/// `derive_seed(cfg.seed, 1)` on the coarsest grid that still resolves the
/// band; integration noise uses stream 0 of `cfg.seed`. Without saturation a
/// non-finite or overflowing amplitude aborts with [`Error::Diverged`].
pub fn integrate<T: Real>(p: &PhysParams<T>, drive: Drive<'_, T>, cfg: &SimConfig<T>) -> Result<SimTrace<T>> {
    p.validate()?;
    p.require_resolved()?;
    let owned;
    let env: &Envelope<T> = match drive {
        Drive::Envelope(e) => e,
        Drive::Spec(spec) => {
            let step = envelope_step(&spec, cfg.dt);
            owned = synthesize(p, &spec, cfg.duration + step, step, derive_seed(cfg.seed, 1))?;
            &owned
        }
    };
    let spec = env.spec;
    cfg.validate(p, spec.envelope_bandwidth())?;
    if env.duration() + env.dt < cfg.duration {
        warn!("envelope shorter than the run; holding its last value");
    }
    let gamma_eff = linear_gamma_eff(p, &spec);
    if cfg.transient_skip * gamma_eff < T::lit(5.0) {
        warn!(
            "transient_skip = {} is below 5/gamma_eff = {}",
            cfg.transient_skip,
            T::lit(5.0) / gamma_eff
        );
    }

    let h = cfg.dt;
    let steps = (cfg.duration / h).round().to_usize().unwrap_or(0).max(1);
    let stride = cfg.record_stride.max(1);
    let capacity = steps / stride + 1;
    let mut trace = SimTrace {
        dt: h * T::from_count(stride),
        b: Vec::with_capacity(capacity),
        a: Vec::with_capacity(capacity),
        alpha: Vec::with_capacity(capacity),
        gamma_eff,
        spec,
        seed: cfg.seed,
    };

    let zero = T::zero();
    let half = T::lit(0.5);
    let i_unit = Complex::new(zero, T::one());
    let kappa = p.kappa;
    let sqrt_kappa = kappa.sqrt();
    let detuning = match spec.sideband {
        Sideband::Red => -p.omega_m,
        Sideband::Blue => p.omega_m,
    };
    let lambda = Complex::new(-kappa / T::lit(2.0), detuning);
    let drive_decay = (lambda * h).exp();
    let drive_gain = (drive_decay - Complex::new(T::one(), zero)) / lambda * sqrt_kappa;

    let var_a = half * (-(-kappa * h).exp_m1());
    let bath = p.gamma * (p.n_th + half);
    let blue = spec.sideband == Sideband::Blue;
    let overflow = T::max_value().sqrt();

    let mut rng = stream_rng(cfg.seed, 0);
    let mut r_prev = env.at(zero);
    let mut alpha = r_prev * sqrt_kappa / (-lambda);
    let mut a = complex_normal::<T, _>(&mut rng, half);
    let mut b = complex_normal::<T, _>(&mut rng, p.n_th + half);
    trace.b.push(b);
    trace.a.push(a);
    trace.alpha.push(alpha);

    for n in 0..steps {
        let t_next = T::from_count(n + 1) * h;
        let r_next = env.at(t_next);
        let r_mean = (r_prev + r_next) * half;
        let alpha_next = drive_decay * alpha + drive_gain * r_mean;
        let coupling = (alpha + alpha_next) * half * p.g0;
        r_prev = r_next;
        alpha = alpha_next;

        let gamma_m = match cfg.saturation {
            Saturation::None => p.gamma,
            Saturation::NonlinearDamping { n_max } => {
                p.gamma * (T::one() + (b.norm_sqr() - half).max(zero) / n_max)
            }
        };

        // drift matrix on (a, b~), b~ = b (red) or b* (blue)
        let m12 = -i_unit * coupling;
        let m21 = if blue { i_unit * coupling.conj() } else { -i_unit * coupling.conj() };
        let d = (gamma_m - kappa) / T::lit(4.0);
        let mean_rate = -(kappa + gamma_m) / T::lit(4.0);
        let g2 = coupling.norm_sqr();
        let s2 = if blue { d * d + g2 } else { d * d - g2 };
        let (c, s) = cosh_sinhc(s2, h);
        let scale = (mean_rate * h).exp();
        let e11 = scale * (c + s * d);
        let e22 = scale * (c - s * d);
        let e12 = m12 * (scale * s);
        let e21 = m21 * (scale * s);

        let bt = if blue { b.conj() } else { b };
        let a_new = a * e11 + bt * e12;
        let bt_new = a * e21 + bt * e22;
        let var_b = bath * (-(-gamma_m * h).exp_m1()) / gamma_m;
        a = a_new + complex_normal(&mut rng, var_a);
        b = (if blue { bt_new.conj() } else { bt_new }) + complex_normal(&mut rng, var_b);

        let nb = b.norm_sqr();
        if !nb.is_finite() || nb > overflow {
            return Err(Error::Diverged {
                time: t_next.as_f64(),
            });
        }
        if (n + 1) % stride == 0 {
            trace.b.push(b);
            trace.a.push(a);
            trace.alpha.push(alpha);
        }
    }
    Ok(trace)
}

/// `(cosh(s h), sinh(s h)/s)` for `s^2` real of either sign.
#[inline]
fn cosh_sinhc<T: Real>(s2: T, h: T) -> (T, T) {
    let x2 = s2 * h * h;
    if x2.abs() < T::lit(1e-8) {
        let c = T::one() + x2 / T::lit(2.0) + x2 * x2 / T::lit(24.0);
        let s = h * (T::one() + x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0));
        (c, s)
    } else if s2 > T::zero() {
        let s = s2.sqrt();
        ((s * h).cosh(), (s * h).sinh() / s)
    } else {
        let w = (-s2).sqrt();
        ((w * h).cos(), (w * h).sin() / w)
    }
}

/// Time-averaged occupancy with an autocorrelation-aware error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyEstimate<T> {
    pub mean: T,
    pub stderr: T,
    /// `span * gamma_eff / 2`: the occupancy decorrelates at `gamma_eff`,
    /// so its integrated autocorrelation time is `2 / gamma_eff`.
    pub effective_samples: T,
}

/// Mean of `|b|^2 - 1/2` after `skip` seconds.
pub fn occupancy_from_trace<T: Real>(trace: &SimTrace<T>, skip: T) -> Result<OccupancyEstimate<T>> {
    let start = trace.index_at(skip);
    if start >= trace.len() {
        return Err(invalid("skip", "skip must be shorter than the trace"));
    }
    let occ = &trace.occupancy()[start..];
    let n = T::from_count(occ.len());
    let mean = occ.iter().copied().sum::<T>() / n;
    let var = if occ.len() > 1 {
        occ.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
    } else {
        T::zero()
    };
    let span = n * trace.dt;
    if span * trace.gamma_eff < T::lit(50.0) {
        warn!("averaging span covers fewer than 50 damping times");
    }
    let effective = (span * trace.gamma_eff / T::lit(2.0)).min(n).max(T::one());
    Ok(OccupancyEstimate {
        mean,
        stderr: (var / effective).sqrt(),
        effective_samples: effective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverPoint<T> {
    /// Noise bandwidth, rad/s.
    pub sigma: T,
    pub occupancy: OccupancyEstimate<T>,
    /// Quantum-noise-approach prediction at this bandwidth.
    pub qna: T,
    pub seed: u64,
}

/// Blue box-noise occupancy versus bandwidth at fixed flux. Point `i` runs
/// with seed `derive_seed(cfg.seed, i)`; points run in parallel.
pub fn bandwidth_crossover_scan<T: Real>(
    p: &PhysParams<T>,
    flux: T,
    sigma_grid: &[T],
    cfg: &SimConfig<T>,
) -> Result<Vec<CrossoverPoint<T>>> {
    if sigma_grid.is_empty() {
        return Err(Error::Empty("sigma grid"));
    }
    let lo = sigma_grid.iter().copied().fold(T::infinity(), T::min);
    let hi = sigma_grid.iter().copied().fold(T::neg_infinity(), T::max);
    if lo > p.gamma / T::lit(5.0) || hi < p.kappa {
        warn!("sigma grid does not span [gamma/5, kappa]; the crossover may not be visible");
    }
    let model = AnalyticModel::new(p)?;
    sigma_grid
        .par_iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let seed = derive_seed(cfg.seed, i as u64);
            let run = SimConfig { seed, ..*cfg };
            let spec = DriveSpec::box_noise(Sideband::Blue, sigma, flux);
            let trace = integrate(p, Drive::Spec(spec), &run)?;
            let occupancy = occupancy_from_trace(&trace, cfg.transient_skip)?;
            Ok(CrossoverPoint {
                sigma,
                occupancy,
                qna: model.occupancy_noise_qna(Sideband::Blue, flux, sigma).n_m,
                seed,
            })
        })
        .collect()
}
