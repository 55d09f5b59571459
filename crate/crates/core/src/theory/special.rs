//! The truncated-Poisson mean function `f1(l) = l (e^l - 1) / (e^l - 1 - l)`
//! and friends.
//!
//! `e^l - 1 - l` loses all precision for small `l`, so below [`SERIES_CUTOFF`]
//! everything is evaluated from power series; above it the exponentials are
//! rewritten in terms of `e^-l` so that large arguments cannot overflow.

use crate::error::{Error, Result};

pub(crate) const SERIES_CUTOFF: f64 = 0.25;

/// `(e^l - 1 - l) / l^2 = sum_{j>=0} l^j / (j+2)!`
fn remainder_ratio_series(l: f64) -> f64 {
    let mut term = 0.5;
    let mut sum: f64 = 0.0;
    let mut j = 0.0;
    while term > 1e-18 * sum.max(1e-300) {
        sum += term;
        term *= l / (j + 3.0);
        j += 1.0;
        if j > 60.0 {
            break;
        }
    }
    sum
}

/// `l^2 / (e^l - 1 - l)`, continuous at 0 with value 2.
pub(crate) fn tilt_ratio(l: f64) -> f64 {
    if l < SERIES_CUTOFF {
        1.0 / remainder_ratio_series(l)
    } else {
        let em = (-l).exp();
        l * l * em / (-(-l).exp_m1() - l * em)
    }
}

/// `f1(l)`; strictly increasing from `f1(0) = 2`.
pub fn f1(l: f64) -> Result<f64> {
    if l.is_nan() || l < 0.0 {
        return Err(Error::domain(format!("f1 requires l >= 0, got {l}")));
    }
    if l == 0.0 {
        return Ok(2.0);
    }
    if l < SERIES_CUTOFF {
        Ok((l.exp_m1() / l) / remainder_ratio_series(l))
    } else {
        let em = (-l).exp();
        let one_minus = -(-l).exp_m1();
        Ok(l * one_minus / (one_minus - l * em))
    }
}

/// Derivative of [`f1`]; `f1'(0) = 1/3`.
pub fn f1_prime(l: f64) -> Result<f64> {
    if l.is_nan() || l < 0.0 {
        return Err(Error::domain(format!("f1' requires l >= 0, got {l}")));
    }
    if l < SERIES_CUTOFF {
        // numerator (e^l-1)^2 - l^2 (e^l-1) - l^2 = sum_{n>=4} t_n l^n,
        // t_n = (2^n - 2 - n(n-1)) / n!
        let mut num = 0.0;
        let mut fact = 24.0;
        let mut pow = 1.0;
        for n in 4..40 {
            let nf = n as f64;
            if n > 4 {
                fact *= nf;
                pow *= l;
            }
            let t = (2f64.powi(n) - 2.0 - nf * (nf - 1.0)) / fact;
            num += t * pow;
            if t * pow < 1e-18 * num {
                break;
            }
        }
        let g = remainder_ratio_series(l);
        Ok(num / (g * g))
    } else {
        let em = (-l).exp();
        let b = -(-l).exp_m1();
        let d = b - l * em;
        Ok((b * b - l * l * b * em - l * l * em * em) / (d * d))
    }
}

/// Inverse of [`f1`] on `(2, inf)` by bisection.
pub fn f1_inv(v: f64) -> Result<f64> {
    if v.is_nan() || v <= 2.0 {
        return Err(Error::domain(format!(
            "f1(l) = {v} has no positive solution (need a value above 2)"
        )));
    }
    if v.is_infinite() {
        return Err(Error::domain("f1 inverse of infinity"));
    }
    let mut lo = 1e-12;
    let mut hi = 64.0;
    while f1(hi)? < v {
        hi *= 2.0;
    }
    while f1(lo)? > v {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(3.0 * (v - 2.0));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f1(mid)? < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flo = f1(lo)?;
    let fhi = f1(hi)?;
    Ok(if (v - flo).abs() <= (fhi - v).abs() {
        lo
    } else {
        hi
    })
}

/// Standard normal distribution function, via the complementary error
/// function of fdlibm (rational approximations, |error| < 1e-16).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
