//! Adiabatic (quasi-static) occupancy: the oscillator is assumed to track
//! the instantaneous drive, so its occupancy is `n_th / (1 + q |r|^2)`
//! averaged over the drive amplitude. Samples past threshold
//! (`1 + q r^2 <= 0`) count as self-oscillating and contribute `n_max`.

use rayon::prelude::*;
use serde::Serialize;

use crate::drive::{box_noise_envelope, sample_rayleigh_amplitude, Envelope, MAX_PHASE_STEP};
use crate::error::{invalid, Error, Result};
use crate::params::{DriveKind, DriveSpec, PhysParams, Sideband};
use crate::real::Real;
use crate::rng::{derive_seed, stream_rng, uniform};

/// Samples drawn from one random stream in [`quasistatic_mc`].
pub const MC_PARTITION: usize = 1 << 16;

/// Smallest accepted Monte Carlo sample count.
pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCResult<T> {
    pub mean_n_m: T,
    /// Standard error from the sample variance (or, for time averages, the
    /// number of independent envelope values).
    pub stderr: T,
    pub unstable_fraction: T,
    pub unstable_count: u64,
    /// `n_max sqrt(unstable_count) / n`: the rare-event part of the error,
    /// which dominates on the blue side.
    pub poisson_stderr: T,
    /// Mean over stable samples only (`n_th` when none are stable).
    pub mean_stable: T,
    pub n_samples: u64,
    pub seed: Option<u64>,
}

/// Per-sample occupancy with the capping rule. Returns `(n, unstable)`.
#[inline]
pub fn capped_occupancy<T: Real>(p: &PhysParams<T>, q: T, r2: T) -> (T, bool) {
    let denom = T::one() + q * r2;
    if denom <= T::zero() {
        (p.n_max, true)
    } else {
        ((p.n_th / denom).min(p.n_max), false)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum<T> {
    n: u64,
    sum: T,
    sum_sq: T,
    unstable: u64,
    stable_sum: T,
}

impl<T: Real> Accum<T> {
    fn push(&mut self, n_m: T, unstable: bool) {
        self.n += 1;
        self.sum += n_m;
        self.sum_sq += n_m * n_m;
        if unstable {
            self.unstable += 1;
        } else {
            self.stable_sum += n_m;
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.unstable += o.unstable;
        self.stable_sum += o.stable_sum;
        self
    }

    fn finish(self, p: &PhysParams<T>, n_independent: T, seed: Option<u64>) -> MCResult<T> {
        let n = T::lit(self.n as f64);
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - T::one())).max(T::zero())
        } else {
            T::zero()
        };
        let stable = self.n - self.unstable;
        MCResult {
            mean_n_m: mean,
            stderr: (var / n_independent.max(T::one())).sqrt(),
            unstable_fraction: T::lit(self.unstable as f64) / n,
            unstable_count: self.unstable,
            poisson_stderr: p.n_max * T::lit(self.unstable as f64).sqrt() / n,
            mean_stable: if stable > 0 {
                self.stable_sum / T::lit(stable as f64)
            } else {
                p.n_th
            },
            n_samples: self.n,
            seed,
        }
    }
}

/// Monte Carlo average over Rayleigh-distributed amplitudes with mean
/// power `flux`.
///
/// Samples are split into partitions of [`MC_PARTITION`]; partition `i`
/// draws from stream `i` of `seed` and partial sums are reduced in
/// partition order, so the result is independent of thread count.
pub fn quasistatic_mc<T: Real>(p: &PhysParams<T>, q: T, flux: T, n_samples: usize, seed: u64) -> Result<MCResult<T>> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(invalid(
            "n_samples",
            format!("need at least {MIN_MC_SAMPLES}, got {n_samples}"),
        ));
    }
    if !(flux >= T::zero()) {
        return Err(invalid("flux", format!("must be >= 0, got {flux}")));
    }
    let partitions = n_samples.div_ceil(MC_PARTITION);
    let partials: Vec<Accum<T>> = (0..partitions)
        .into_par_iter()
        .map(|i| {
            let count = MC_PARTITION.min(n_samples - i * MC_PARTITION);
            let mut rng = stream_rng(seed, i as u64);
            let mut acc = Accum::default();
            for _ in 0..count {
                let u = T::lit(uniform(&mut rng));
                let r = sample_rayleigh_amplitude(flux, u).expect("u in [0,1)");
                let (n_m, unstable) = capped_occupancy(p, q, r * r);
                acc.push(n_m, unstable);
            }
            acc
        })
        .collect();
    let total = partials.into_iter().fold(Accum::default(), Accum::merge);
    let n = T::lit(total.n as f64);
    Ok(total.finish(p, n, Some(seed)))
}

/// Time average of the capped occupancy over one drive waveform, starting
/// `skip` seconds in.
///
/// The error bar counts one independent value per `2 pi / sigma` for box
/// noise and is zero for deterministic envelopes.
pub fn quasistatic_timeavg<T: Real>(p: &PhysParams<T>, q: T, env: &Envelope<T>, skip: T) -> Result<MCResult<T>> {
    let start = if skip > T::zero() {
        (skip / env.dt).ceil().to_usize().unwrap_or(usize::MAX)
    } else {
        0
    };
    if start >= env.samples.len() {
        return Err(Error::Empty("no envelope samples after skip"));
    }
    let mut acc = Accum::default();
    for z in &env.samples[start..] {
        let (n_m, unstable) = capped_occupancy(p, q, z.norm_sqr());
        acc.push(n_m, unstable);
    }
    let span = T::from_count(env.samples.len() - start) * env.dt;
    let n_independent = match env.spec.kind {
        DriveKind::BoxNoise { sigma, .. } => (span * sigma / T::TAU()).min(T::lit(acc.n as f64)),
        _ => T::infinity(),
    };
    let mut out = acc.finish(p, n_independent, env.seed);
    if n_independent.is_infinite() {
        out.stderr = T::zero();
    }
    Ok(out)
}

/// Observed-occupancy distribution at one flux of a threshold scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScanPoint<T> {
    pub flux: T,
    pub nbar0: T,
    pub gamma_opt_over_gamma: T,
    /// Mean over realizations of the per-realization averages.
    pub mean_n_m: T,
    /// Standard deviation of the per-realization averages over sqrt(count).
    pub stderr: T,
    pub unstable_fraction: T,
    pub q05: T,
    pub q50: T,
    pub q95: T,
    /// Per-realization averages, realization order.
    pub observations: Vec<T>,
}

/// Blue-noise threshold scan at finite observation time.
///
/// Each realization `j` is one box-noise waveform (seed
/// `derive_seed(seed, j)`) of length `observation_time`, rescaled to every
/// flux of the grid, so the jitter between realizations shows how the
/// rarest noise peaks move the apparent threshold.
pub fn finite_statistics_threshold_scan<T: Real>(
    p: &PhysParams<T>,
    flux_grid: &[T],
    sigma: T,
    observation_time: T,
    n_realizations: usize,
    seed: u64,
) -> Result<Vec<ThresholdScanPoint<T>>> {
    if flux_grid.is_empty() {
        return Err(Error::Empty("flux grid"));
    }
    if n_realizations == 0 {
        return Err(Error::Empty("realizations"));
    }
    let q = p.q_parameter(Sideband::Blue);
    let dt = T::lit(MAX_PHASE_STEP) / sigma;
    // unit-flux waveforms, rescaled per grid point
    let unit = DriveSpec::box_noise(Sideband::Blue, sigma, T::one());
    unit.validate(p)?;
    let waveforms: Vec<Vec<T>> = (0..n_realizations)
        .into_par_iter()
        .map(|j| {
            let env = box_noise_envelope(&unit, observation_time, dt, derive_seed(seed, j as u64))?;
            Ok(env.samples.iter().map(|z| z.norm_sqr()).collect())
        })
        .collect::<Result<_>>()?;

    let points = flux_grid
        .par_iter()
        .map(|&flux| {
            let mut unstable = 0u64;
            let mut total = 0u64;
            let observations: Vec<T> = waveforms
                .iter()
                .map(|w| {
                    let mut sum = T::zero();
                    for &r2 in w {
                        let (n_m, bad) = capped_occupancy(p, q, flux * r2);
                        sum += n_m;
                        unstable += bad as u64;
                    }
                    total += w.len() as u64;
                    sum / T::from_count(w.len())
                })
                .collect();
            let count = T::from_count(observations.len());
            let mean = observations.iter().copied().sum::<T>() / count;
            let var = if observations.len() > 1 {
                observations.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (count - T::one())
            } else {
                T::zero()
            };
            let nbar0 = p.nbar0_from_flux(flux);
            ThresholdScanPoint {
                flux,
                nbar0,
                gamma_opt_over_gamma: p.gamma_opt_bar(nbar0) / p.gamma,
                mean_n_m: mean,
                stderr: (var / count).sqrt(),
                unstable_fraction: T::lit(unstable as f64) / T::lit(total as f64),
                q05: quantile(&observations, T::lit(0.05)),
                q50: quantile(&observations, T::lit(0.5)),
                q95: quantile(&observations, T::lit(0.95)),
                observations,
            }
        })
        .collect();
    Ok(points)
}

/// Linear-interpolation sample quantile (Hyndman–Fan type 7).
pub fn quantile<T: Real>(values: &[T], prob: T) -> T {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in sample"));
    let h = (T::from_count(sorted.len() - 1)) * prob.max(T::zero()).min(T::one());
    let lo = h.floor().to_usize().unwrap_or(0);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - T::from_count(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
