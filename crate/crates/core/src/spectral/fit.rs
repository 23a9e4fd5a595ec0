//! Lorentzian least squares by damped Gauss-Newton (Levenberg-Marquardt).

use log::warn;
use serde::Serialize;

use super::psd::Psd;
use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Relative parameter change at which iteration stops.
pub const PARAM_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200;

const MIN_POINTS: usize = 10;

/// `baseline + (area/pi) (fwhm/2) / ((f - center)^2 + (fwhm/2)^2)`.
#[inline]
pub fn lorentzian<T: Real>(f: T, center: T, fwhm: T, area: T, baseline: T) -> T {
    let h = fwhm / T::lit(2.0);
    let x = f - center;
    baseline + area * T::FRAC_1_PI() * h / (x * x + h * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitInit<T> {
    /// Centre at the maximum, width from the half-power crossings, area from
    /// the baseline-subtracted integral.
    Auto,
    Explicit {
        center: T,
        fwhm: T,
        area: T,
        baseline: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumFit<T> {
    /// Hz.
    pub center: T,
    /// Full width at half maximum, Hz.
    pub fwhm: T,
    /// Integrated peak power (the occupancy, for a mechanical spectrum).
    pub area: T,
    pub baseline: T,
    /// One-sigma uncertainties of (center, fwhm, area, baseline) from the
    /// residual variance and the Jacobian at the optimum.
    pub uncertainties: [T; 4],
    /// sqrt of the residual sum of squares.
    pub residual_norm: T,
    pub converged: bool,
    pub iterations: usize,
}

fn residuals<T: Real>(f: &[T], y: &[T], w: &[T], th: &[T; 4], out: &mut [T]) -> T {
    let mut cost = T::zero();
    for (((r, &fi), &yi), &wi) in out.iter_mut().zip(f).zip(y).zip(w) {
        *r = yi - lorentzian(fi, th[0], th[1], th[2], th[3]);
        cost += wi * *r * *r;
    }
    cost
}

/// Gradient of the model w.r.t. (center, fwhm, area, baseline).
#[inline]
fn jacobian_row<T: Real>(f: T, th: &[T; 4]) -> [T; 4] {
    let h = th[1] / T::lit(2.0);
    let x = f - th[0];
    let d = x * x + h * h;
    let a = th[2] * T::FRAC_1_PI();
    [
        a * h * T::lit(2.0) * x / (d * d),
        a / T::lit(2.0) * (x * x - h * h) / (d * d),
        T::FRAC_1_PI() * h / d,
        T::one(),
    ]
}

fn auto_init<T: Real>(f: &[T], y: &[T]) -> Result<[T; 4]> {
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite PSD"))
        .expect("non-empty");
    let ymin = y.iter().copied().fold(T::infinity(), T::min);
    let height = ymax - ymin;
    if !(height > T::zero()) || !height.is_finite() {
        return Err(Error::FlatSpectrum);
    }
    let half = ymin + height / T::lit(2.0);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<T> {
        let mut prev = imax;
        for i in range {
            if y[i] < half {
                // interpolate between prev (above) and i (below)
                let frac = (y[prev] - half) / (y[prev] - y[i]);
                return Some(f[prev] + (f[i] - f[prev]) * frac);
            }
            prev = i;
        }
        None
    };
    let right = crossing(&mut (imax + 1..y.len()));
    let left = crossing(&mut (0..imax).rev());
    let spacing = (f[f.len() - 1] - f[0]) / T::from_count(f.len() - 1);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => T::lit(2.0) * (f[imax] - l),
        (None, Some(r)) => T::lit(2.0) * (r - f[imax]),
        (None, None) => (f[f.len() - 1] - f[0]) / T::lit(2.0),
    }
    .max(spacing);
    let mut area = T::zero();
    for i in 1..f.len() {
        area += (y[i] + y[i - 1] - T::lit(2.0) * ymin) / T::lit(2.0) * (f[i] - f[i - 1]);
    }
    Ok([f[imax], fwhm, area, ymin])
}

/// Passes of the model-weighted refinement after the unweighted fit.
const REWEIGHT_PASSES: usize = 2;

/// Fits a single Lorentzian plus constant baseline to `psd`.
///
/// An unweighted fit is refined by least squares weighted with
/// `(peak / model)^2`, matching the relative scatter of averaged
/// periodograms so the wings are not left to the baseline. Each pass stops
/// when every parameter moves by less than [`PARAM_TOLERANCE`] relative to
/// its scale (the width, for center and baseline offsets), or after
/// [`MAX_ITERATIONS`] with `converged = false`.
pub fn lorentzian_fit<T: Real>(psd: &Psd<T>, init: FitInit<T>) -> Result<SpectrumFit<T>> {
    let f = &psd.frequencies;
    let y = &psd.values;
    if f.len() < MIN_POINTS {
        return Err(invalid("psd", format!("need at least {MIN_POINTS} points, got {}", f.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("psd", "non-finite values"));
    }
    let th = match init {
        FitInit::Auto => auto_init(f, y)?,
        FitInit::Explicit {
            center,
            fwhm,
            area,
            baseline,
        } => [center, fwhm, area, baseline],
    };
    let spacing = (f[f.len() - 1] - f[0]) / T::from_count(f.len() - 1);
    if th[1] < T::lit(3.0) * spacing {
        warn!("peak is resolved by fewer than 3 points per linewidth");
    }

    let mut w = vec![T::one(); f.len()];
    let mut pass = levenberg_marquardt(f, y, &w, th);
    let mut iterations = pass.iterations;
    for _ in 0..REWEIGHT_PASSES {
        if !pass.converged || pass.cost == T::zero() {
            break;
        }
        let t = pass.th;
        let model: Vec<T> = f.iter().map(|&fi| lorentzian(fi, t[0], t[1], t[2], t[3])).collect();
        let peak = model.iter().copied().fold(T::zero(), T::max);
        let floor = peak * T::lit(1e-6);
        if !(peak > T::zero()) {
            break;
        }
        for (wi, &m) in w.iter_mut().zip(&model) {
            let r = peak / m.max(floor);
            *wi = r * r;
        }
        let next = levenberg_marquardt(f, y, &w, t);
        iterations += next.iterations;
        if !next.converged {
            break;
        }
        pass = next;
    }

    let th = pass.th;
    let mut res = vec![T::zero(); f.len()];
    let ones = vec![T::one(); f.len()];
    let rss = residuals(f, y, &ones, &th, &mut res);
    Ok(SpectrumFit {
        center: th[0],
        fwhm: th[1],
        area: th[2],
        baseline: th[3],
        uncertainties: covariance_diag(f, &w, &th, pass.cost),
        residual_norm: rss.sqrt(),
        converged: pass.converged && th[1] > T::zero(),
        iterations,
    })
}

struct Pass<T> {
    th: [T; 4],
    cost: T,
    converged: bool,
    iterations: usize,
}

/// Damped Gauss-Newton on the weighted residual sum of squares, which never
/// increases between accepted steps.
fn levenberg_marquardt<T: Real>(f: &[T], y: &[T], w: &[T], mut th: [T; 4]) -> Pass<T> {
    let n = f.len();
    let mut res = vec![T::zero(); n];
    let mut trial_res = vec![T::zero(); n];
    let mut cost = residuals(f, y, w, &th, &mut res);
    let mut lambda = T::lit(1e-3);
    let tol = T::lit(PARAM_TOLERANCE);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(f, w, &res, &th);
        let mut stepped = false;
        // inner loop: raise damping until the cost does not increase
        for _ in 0..60 {
            let mut a = jtj;
            for i in 0..4 {
                a[i][i] += lambda * jtj[i][i].max(T::min_positive_value());
            }
            let Some(delta) = solve4(a, jtr) else {
                lambda *= T::lit(10.0);
                continue;
            };
            let mut trial = th;
            for i in 0..4 {
                trial[i] += delta[i];
            }
            trial[1] = trial[1].abs();
            let trial_cost = residuals(f, y, w, &trial, &mut trial_res);
            if trial_cost.is_finite() && trial_cost <= cost {
                let scale = [trial[1], trial[1], trial[2].abs(), trial[2].abs() / trial[1]];
                let small = (0..4).all(|i| delta[i].abs() <= tol * scale[i].max(T::min_positive_value()));
                th = trial;
                cost = trial_cost;
                std::mem::swap(&mut res, &mut trial_res);
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-15));
                stepped = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= T::lit(4.0);
        }
        if converged || !stepped || cost == T::zero() {
            converged = converged || cost == T::zero() || !stepped;
            break;
        }
    }
    Pass {
        th,
        cost,
        converged,
        iterations,
    }
}

fn normal_equations<T: Real>(f: &[T], w: &[T], res: &[T], th: &[T; 4]) -> ([[T; 4]; 4], [T; 4]) {
    let mut jtj = [[T::zero(); 4]; 4];
    let mut jtr = [T::zero(); 4];
    for ((&fi, &ri), &wi) in f.iter().zip(res).zip(w) {
        let j = jacobian_row(fi, th);
        for a in 0..4 {
            jtr[a] += wi * j[a] * ri;
            for b in a..4 {
                jtj[a][b] += wi * j[a] * j[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    (jtj, jtr)
}

fn covariance_diag<T: Real>(f: &[T], w: &[T], th: &[T; 4], cost: T) -> [T; 4] {
    let zeros = vec![T::zero(); f.len()];
    let (jtj, _) = normal_equations(f, w, &zeros, th);
    let dof = T::from_count(f.len().saturating_sub(4).max(1));
    let s2 = cost / dof;
    let mut out = [T::nan(); 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut e = [T::zero(); 4];
        e[i] = T::one();
        if let Some(col) = solve4(jtj, e) {
            *slot = (col[i] * s2).max(T::zero()).sqrt();
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve4<T: Real>(mut a: [[T; 4]; 4], mut b: [T; 4]) -> Option<[T; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if !(a[pivot][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = [T::zero(); 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
