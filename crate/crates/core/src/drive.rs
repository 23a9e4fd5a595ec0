//! Drive envelopes `r(t)`: the slowly varying complex amplitude of the
//! incident field in the frame of its band centre, in sqrt(photons/s).

use log::warn;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::params::{DriveKind, DriveSpec, PhysParams, Sideband};
use crate::real::Real;
use crate::rng::{complex_normal, stream_rng};

/// Largest `dt * sigma` (box noise) or `dt * delta` (two tones) accepted.
pub const MAX_PHASE_STEP: f64 = 0.1;

/// Uniformly sampled drive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    pub samples: Vec<Complex<T>>,
    /// Sample step, s.
    pub dt: T,
    pub spec: DriveSpec<T>,
    /// Seed of the random realization; `None` for deterministic drives.
    pub seed: Option<u64>,
}

impl<T: Real> Envelope<T> {
    pub fn new(samples: Vec<Complex<T>>, dt: T, spec: DriveSpec<T>, seed: Option<u64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "an envelope needs at least two samples"));
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        Ok(Envelope {
            samples,
            dt,
            spec,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_count(self.samples.len())
    }

    pub fn sideband(&self) -> Sideband {
        self.spec.sideband
    }

    /// Time average of `|r|^2`.
    pub fn mean_power(&self) -> T {
        let total: T = self.samples.iter().map(|z| z.norm_sqr()).sum();
        total / T::from_count(self.samples.len())
    }

    /// Linear interpolation at time `t`; held constant past either end.
    pub fn at(&self, t: T) -> Complex<T> {
        let x = t / self.dt;
        if x <= T::zero() {
            return self.samples[0];
        }
        let last = self.samples.len() - 1;
        let i = x.floor().to_usize().unwrap_or(last);
        if i >= last {
            return self.samples[last];
        }
        let frac = x - T::from_count(i);
        self.samples[i] * (T::one() - frac) + self.samples[i + 1] * frac
    }
}

/// Inverse-transform draw of a drive amplitude with density
/// `(2r/F0) exp(-r^2/F0)`: `sqrt(-F0 ln(1-u))`.
pub fn sample_rayleigh_amplitude<T: Real>(flux: T, u: T) -> Result<T> {
    if !(u >= T::zero() && u < T::one()) {
        return Err(Error::UniformOutOfRange(u.as_f64()));
    }
    if !(flux >= T::zero()) {
        return Err(invalid("flux", format!("must be >= 0, got {flux}")));
    }
    // ln_1p keeps precision for small u
    Ok((-flux * (-u).ln_1p()).sqrt())
}

fn sample_count<T: Real>(duration: T, dt: T) -> Result<usize> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(duration.is_finite() && duration > T::zero()) {
        return Err(invalid("duration", format!("must be > 0, got {duration}")));
    }
    let n = (duration / dt).round().to_usize().unwrap_or(0);
    Ok(n.max(2))
}

/// Gaussian box-spectrum noise: flat power density over `[-sigma/2, sigma/2]`
/// rad/s, zero elsewhere, ensemble mean `<|r|^2> = F0`.
///
/// In-band DFT bins receive independent circular complex Gaussians (drawn in
/// ascending bin order from stream 0 of `seed`), the rest are zeroed, and
/// the inverse transform is scaled by `sqrt(F0 / bins)`. The realization is
/// periodic over `duration`.
pub fn box_noise_envelope<T: Real>(spec: &DriveSpec<T>, duration: T, dt: T, seed: u64) -> Result<Envelope<T>> {
    let (sigma, flux) = match spec.kind {
        DriveKind::BoxNoise { sigma, flux } => (sigma, flux),
        _ => return Err(invalid("spec", "box_noise_envelope needs a BoxNoise drive")),
    };
    if !(sigma > T::zero()) {
        return Err(invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    if !(flux >= T::zero()) {
        return Err(invalid("flux", format!("must be >= 0, got {flux}")));
    }
    let n = sample_count(duration, dt)?;
    let half_width = sigma / T::lit(2.0);
    let nyquist = T::PI() / dt;
    if half_width > nyquist {
        return Err(Error::AboveNyquist {
            half_width: half_width.as_f64(),
            nyquist: nyquist.as_f64(),
        });
    }
    let step = dt * sigma;
    if step > T::lit(MAX_PHASE_STEP) {
        return Err(Error::Unresolved {
            what: "dt * sigma",
            value: step.as_f64(),
            limit: MAX_PHASE_STEP,
        });
    }
    let span = T::from_count(n) * dt;
    if span * sigma < T::lit(20.0 * std::f64::consts::PI) {
        warn!(
            "box noise spans only {:.1} correlation times; statistics will not converge",
            (span * sigma / T::TAU()).as_f64()
        );
    }

    let mut rng = stream_rng(seed, 0);
    let df = T::TAU() / span;
    let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n];
    let mut bins = 0usize;
    for (k, slot) in spectrum.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        if (T::lit(signed) * df).abs() <= half_width {
            *slot = complex_normal(&mut rng, T::one());
            bins += 1;
        }
    }
    let fft = FftPlanner::<T>::new().plan_fft_inverse(n);
    fft.process(&mut spectrum);
    let scale = if bins == 0 {
        T::zero()
    } else {
        (flux / T::from_count(bins)).sqrt()
    };
    for z in spectrum.iter_mut() {
        *z = *z * scale;
    }
    Envelope::new(spectrum, dt, *spec, Some(seed))
}

/// `2 alpha_in cos(delta t / 2)`: two tones `delta` apart, symmetric about
/// the band centre.
pub fn two_tone_envelope<T: Real>(spec: &DriveSpec<T>, duration: T, dt: T) -> Result<Envelope<T>> {
    let (delta, alpha_in) = match spec.kind {
        DriveKind::TwoTone { delta, alpha_in } => (delta, alpha_in),
        _ => return Err(invalid("spec", "two_tone_envelope needs a TwoTone drive")),
    };
    let n = sample_count(duration, dt)?;
    let step = delta * dt;
    if step > T::lit(MAX_PHASE_STEP) {
        return Err(Error::Unresolved {
            what: "dt * delta",
            value: step.as_f64(),
            limit: MAX_PHASE_STEP,
        });
    }
    let two = T::lit(2.0);
    let samples = (0..n)
        .map(|j| {
            let t = T::from_count(j) * dt;
            Complex::new(two * alpha_in * (delta * t / two).cos(), T::zero())
        })
        .collect();
    Envelope::new(samples, dt, *spec, None)
}

/// Constant amplitude giving `n0` intracavity photons:
/// `r = sqrt(n0 omega_m^2 / kappa)`.
pub fn coherent_envelope<T: Real>(
    sideband: Sideband,
    n0: T,
    p: &PhysParams<T>,
    duration: T,
    dt: T,
) -> Result<Envelope<T>> {
    if !(n0 >= T::zero()) {
        return Err(invalid("n0", format!("must be >= 0, got {n0}")));
    }
    let n = sample_count(duration, dt)?;
    let r = p.flux_from_nbar0(n0).sqrt();
    Envelope::new(
        vec![Complex::new(r, T::zero()); n],
        dt,
        DriveSpec::coherent(sideband, n0),
        None,
    )
}

/// Envelope for any drive: the seed is used only by box noise.
pub fn synthesize<T: Real>(p: &PhysParams<T>, spec: &DriveSpec<T>, duration: T, dt: T, seed: u64) -> Result<Envelope<T>> {
    spec.validate(p)?;
    match spec.kind {
        DriveKind::CoherentTone { n0 } => coherent_envelope(spec.sideband, n0, p, duration, dt),
        DriveKind::BoxNoise { .. } => box_noise_envelope(spec, duration, dt, seed),
        DriveKind::TwoTone { .. } => two_tone_envelope(spec, duration, dt),
    }
}

/// Coarsest step that is an integer multiple of `base` and still resolves
/// the drive envelope.
pub fn envelope_step<T: Real>(spec: &DriveSpec<T>, base: T) -> T {
    let band = match spec.kind {
        DriveKind::CoherentTone { .. } => T::zero(),
        DriveKind::BoxNoise { sigma, .. } => sigma,
        DriveKind::TwoTone { delta, .. } => delta,
    };
    if band <= T::zero() {
        // constant envelopes: any step works, keep memory small
        return base * T::lit(1024.0);
    }
    let limit = T::lit(MAX_PHASE_STEP) / band;
    let mult = (limit / base).floor().max(T::one());
    base * mult
}
