use std::io::Write;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients<T: Real>(self, len: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); len],
            // periodic Hann
            Window::Hann => (0..len)
                .map(|n| {
                    let x = T::TAU() * T::from_count(n) / T::from_count(len);
                    T::lit(0.5) * (T::one() - x.cos())
                })
                .collect(),
        }
    }
}

/// Two-sided power spectral density of a complex series.
///
/// `values` are per Hz and integrate to the mean power:
/// `Σ values * df = <|x|^2>` (exactly so for a rectangular window).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd<T> {
    /// Ascending, uniform, Hz; zero frequency at index `len/2`.
    pub frequencies: Vec<T>,
    pub values: Vec<T>,
    pub segment_count: usize,
    /// Number of independent periodograms the average is worth, accounting
    /// for window overlap.
    pub equivalent_segments: T,
    pub window: Window,
    /// Frequency resolution, Hz.
    pub df: T,
}

impl<T: Real> Psd<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ values * df`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.df
    }

    /// Restricts to `[lo, hi]` Hz.
    pub fn band(&self, lo: T, hi: T) -> Psd<T> {
        let (frequencies, values): (Vec<T>, Vec<T>) = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, v)| (*f, *v))
            .unzip();
        Psd {
            frequencies,
            values,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq,value")?;
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            writeln!(w, "{:e},{:e}", f.as_f64(), v.as_f64())?;
        }
        Ok(())
    }
}

/// Welch estimate: mean of windowed periodograms over segments of
/// `segment_length` samples overlapping by the fraction `overlap`.
pub fn welch_psd<T: Real>(
    series: &[Complex<T>],
    dt: T,
    segment_length: usize,
    overlap: T,
    window: Window,
) -> Result<Psd<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if segment_length < 2 {
        return Err(invalid("segment_length", "must be at least 2"));
    }
    if !(overlap >= T::zero() && overlap <= T::lit(0.9)) {
        return Err(invalid("overlap", format!("must lie in [0, 0.9], got {overlap}")));
    }
    if series.len() < segment_length {
        return Err(Error::TooShort {
            len: series.len(),
            segment: segment_length,
        });
    }
    let len = segment_length;
    let step = ((T::one() - overlap) * T::from_count(len))
        .round()
        .to_usize()
        .unwrap_or(len)
        .max(1);
    let segments = 1 + (series.len() - len) / step;
    let w: Vec<T> = window.coefficients(len);
    let w_power: T = w.iter().map(|&x| x * x).sum();

    let fft = FftPlanner::<T>::new().plan_fft_forward(len);
    let mut acc = vec![T::zero(); len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); len];
    for s in 0..segments {
        let start = s * step;
        for ((slot, x), wk) in buf.iter_mut().zip(&series[start..start + len]).zip(&w) {
            *slot = *x * *wk;
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let norm = dt / (w_power * T::from_count(segments));
    let df = (T::from_count(len) * dt).recip();
    let half = len / 2;
    let mut frequencies = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    // ascending order: bins len-half .. len-1 are negative frequencies
    for i in 0..len {
        let k = (i + len - half) % len;
        let signed = i as f64 - half as f64;
        frequencies.push(T::lit(signed) * df);
        values.push(acc[k] * norm);
    }
    Ok(Psd {
        frequencies,
        values,
        segment_count: segments,
        equivalent_segments: equivalent_segments(&w, step, segments),
        window,
        df,
    })
}

/// Single rectangular periodogram of the whole series.
pub fn periodogram<T: Real>(series: &[Complex<T>], dt: T) -> Result<Psd<T>> {
    welch_psd(series, dt, series.len(), T::zero(), Window::Rectangular)
}

/// Variance-equivalent segment count of an overlapped Welch average.
fn equivalent_segments<T: Real>(w: &[T], step: usize, segments: usize) -> T {
    let w2: T = w.iter().map(|&x| x * x).sum();
    let k = T::from_count(segments);
    let mut factor = T::one();
    for j in 1..segments {
        let shift = j * step;
        if shift >= w.len() {
            break;
        }
        let rho: T = w[..w.len() - shift].iter().zip(&w[shift..]).map(|(&a, &b)| a * b).sum::<T>() / w2;
        factor += T::lit(2.0) * (T::one() - T::from_count(j) / k) * rho * rho;
    }
    k / factor
}
