//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's own special functions or averages.
#![allow(dead_code)]

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// `<1/(1 + c u)>` for `u` exponentially distributed with unit mean, i.e.
/// the Rayleigh-weighted average of `1/(1 + q r^2)` with `c = q F0`.
///
/// Integrates `e^{-u}/(1 + c u)` on `[0, 60]` (the tail is below 1e-26),
/// split at `1/c` and a few decades beyond so each piece is smooth.
pub fn rayleigh_average(c: f64) -> f64 {
    let f = |u: f64| (-u).exp() / (1.0 + c * u);
    let mut knots = vec![0.0];
    let mut x = 1.0 / c;
    while x < 60.0 {
        if x > 0.0 {
            knots.push(x);
        }
        x *= 10.0;
    }
    knots.push(60.0);
    knots.dedup();
    knots.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-15)).sum()
}

/// Period average of `1/(1 + a cos^2 theta)` by dense midpoint sums.
pub fn periodic_average(a: f64, points: usize) -> f64 {
    let h = std::f64::consts::TAU / points as f64;
    (0..points)
        .map(|i| {
            let c = ((i as f64 + 0.5) * h).cos();
            1.0 / (1.0 + a * c * c)
        })
        .sum::<f64>()
        / points as f64
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS distance for `n` samples.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
