//! Small statistics helpers: Wilson intervals, mergeable moment
//! accumulators and fixed-precision number formatting.

use serde::Serialize;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (centre - half).max(0.0).min(p),
        (centre + half).min(1.0).max(p),
    )
}

/// Running count, mean and second/third central moment sums. Accumulators
/// merge exactly, so parallel reductions give the same moments as a
/// sequential pass up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        *self = self.merge(&Moments {
            count: 1,
            mean: x,
            m2: 0.0,
            m3: 0.0,
        });
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d * d * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        Moments {
            count: self.count + other.count,
            mean,
            m2,
            m3,
        }
    }

    /// Unbiased sample variance; 0 for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count as f64 - 1.0)
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sd() / (self.count as f64).sqrt()
        }
    }

    /// Sample skewness `m3 / m2^(3/2)` with population normalisation.
    pub fn skewness(&self) -> f64 {
        if self.count < 2 || self.m2 == 0.0 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.m3 / n) / (self.m2 / n).powf(1.5)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// exponent notation outside `[1e-5, 1e9)`.
pub fn fmt_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // p = 0.5, n = 100: centre 0.5, half-width z sqrt(0.25/100 + z^2/40000) / (1 + z^2/100)
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(
            (lo - 0.403831).abs() < 1e-6 && (hi - 0.596169).abs() < 1e-6,
            "{lo} {hi}"
        );
        let (lo, hi) = wilson_interval(0, 20, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.161125).abs() < 1e-6, "{hi}");
        let (lo, hi) = wilson_interval(20, 20, Z95);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.838875).abs() < 1e-6);
    }

    #[test]
    fn moments_match_two_pass() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37 % 101) as f64).powf(1.3) - 20.0)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let m3: f64 = xs.iter().map(|x| (x - mean).powi(3)).sum();
        let skew = (m3 / n) / (m2 / n).powf(1.5);

        let seq: Moments = xs.iter().copied().collect();
        let (a, b) = xs.split_at(317);
        let merged = a
            .iter()
            .copied()
            .collect::<Moments>()
            .merge(&b.iter().copied().collect());
        for m in [seq, merged] {
            assert_eq!(m.count, 1000);
            assert!((m.mean - mean).abs() < 1e-10);
            assert!((m.variance() - m2 / (n - 1.0)).abs() < 1e-8 * m2);
            assert!((m.skewness() - skew).abs() < 1e-9);
        }
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(0.5), "0.5");
        assert_eq!(fmt_g9(1.0894014266895655), "1.08940143");
        assert_eq!(fmt_g9(-0.2917), "-0.2917");
        assert_eq!(fmt_g9(4000.0), "4000");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1234567891.0), "1.23456789e+09");
        assert_eq!(fmt_g9(0.0001), "0.0001");
        assert_eq!(fmt_g9(0.00001234), "1.234e-05");
        assert_eq!(fmt_g9(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_g9(9.9999999999), "10");
    }
}
