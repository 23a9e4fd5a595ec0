//! Exponential integral `E1`.
//!
//! Power series for `x <= 1`, modified-Lentz continued fraction above.

use crate::real::Real;

const MAX_TERMS: usize = 500;

/// `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`. Returns `+inf` at 0 and NaN for
/// negative or NaN arguments.
pub fn e1<T: Real>(x: T) -> T {
    if x.is_nan() || x < T::zero() {
        return T::nan();
    }
    if x == T::zero() {
        return T::infinity();
    }
    if x <= T::one() {
        e1_series(x)
    } else {
        exp_e1_cf(x) * (-x).exp()
    }
}

/// `e^x E1(x)`, finite for arbitrarily large `x` (tends to `1/x`).
pub fn exp_e1<T: Real>(x: T) -> T {
    if x.is_nan() || x < T::zero() {
        return T::nan();
    }
    if x == T::zero() {
        return T::infinity();
    }
    if x <= T::one() {
        x.exp() * e1_series(x)
    } else {
        exp_e1_cf(x)
    }
}

fn e1_series<T: Real>(x: T) -> T {
    // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k k!)
    let eps = T::epsilon();
    let mut sum = T::zero();
    let mut term = T::one(); // (-x)^k / k!
    for k in 1..MAX_TERMS {
        let kf = T::from_count(k);
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() <= eps * sum.abs() {
            break;
        }
    }
    -T::lit(EULER_GAMMA) - x.ln() - sum
}

fn exp_e1_cf<T: Real>(x: T) -> T {
    // e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut b = x + T::one();
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let fi = T::from_count(i);
        let a = -fi * fi;
        b += two;
        d = T::one() / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - T::one()).abs() <= eps {
            break;
        }
    }
    h
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath.e1 at 30 digits.
    const TABLE: [(f64, f64); 9] = [
        (1e-6, 13.238_295_893_062_49),
        (0.01, 4.037_929_576_538_11),
        (0.1, 1.822_923_958_419_39),
        (0.5, 0.559_773_594_776_161),
        (1.0, 0.219_383_934_395_520),
        (1.5, 0.100_019_582_406_632),
        (2.0, 0.048_900_510_708_061_1),
        (10.0, 4.156_968_929_685_32e-6),
        (50.0, 3.783_264_029_550_46e-24),
    ];

    #[test]
    fn matches_reference_table() {
        for (x, want) in TABLE {
            let got = e1(x);
            assert!(((got - want) / want).abs() < 1e-12, "E1({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn scaled_form_large_argument() {
        // e^x E1(x) ~ 1/x (1 - 1/x + 2/x^2 - 6/x^3 ...)
        let x = 1e6f64;
        let asym = (1.0 - 1.0 / x + 2.0 / (x * x)) / x;
        assert!(((exp_e1(x) - asym) / asym).abs() < 1e-12);
        assert!((exp_e1(1.0f64) - std::f64::consts::E * 0.219_383_934_395_520).abs() < 1e-14);
    }

    #[test]
    fn continuous_across_branch() {
        let below = 1.0f64 - 1e-12;
        let above = 1.0f64 + 1e-12;
        assert!((e1(below) - exp_e1_cf(above) * (-above).exp()).abs() < 1e-11);
    }

    #[test]
    fn edge_arguments() {
        assert!(e1(0.0f64).is_infinite());
        assert!(e1(-1.0f64).is_nan());
        assert!(exp_e1(f64::NAN).is_nan());
    }

    #[test]
    fn single_precision() {
        let got = e1(1.0f32);
        assert!((got - 0.219_383_93).abs() < 1e-6);
    }
}
