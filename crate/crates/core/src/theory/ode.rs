//! Thresholds and the closed-form mean trajectory of the peeling chain.
//!
//! With `u = (1 - theta)^(1/k)` and `gamma = k / rho`, the scaled counts of
//! degree-1 and degree->=2 variables after `theta * n` peeling steps are
//!
//! ```text
//! y1 = k u^(k-1) [u - 1 + exp(-gamma u^(k-1))]
//! y2 = rho [1 - exp(-gamma u^(k-1)) - gamma u^(k-1) exp(-gamma u^(k-1))]
//! ```
//!
//! valid until `y1` first reaches zero.

use serde::Serialize;

use super::special::{f1, f1_inv};
use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub k: usize,
    /// Positive root of `f1(lambda) = k`.
    pub lambda_k: f64,
    /// Satisfiability threshold of the variables-to-equations ratio.
    pub rho_k: f64,
    /// Scaled peeling time at which the mean `y1` first hits zero at `rho_k`.
    pub theta_k: f64,
    /// Above this ratio the 2-core is empty with high probability.
    pub rho_core: f64,
    /// Maximiser of `k (1 - e^-x)^(k-1) / x`.
    pub x_core: f64,
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(Error::domain(format!("arity k = {k} must be at least 3")));
    }
    if k > 64 {
        return Err(Error::domain(format!(
            "arity k = {k} is unreasonably large"
        )));
    }
    Ok(())
}

/// `k (1 - e^-x)^(k-1) / x`, the ratio `rho` at which `x` solves the core equation.
pub fn core_ratio(x: f64, k: usize) -> f64 {
    let b = -(-x).exp_m1();
    k as f64 * b.powi(k as i32 - 1) / x
}

fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, go_right: F) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if go_right(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stationary point of [`core_ratio`]: the root of `(k-1) x = e^x - 1`.
fn core_argmax(k: usize) -> f64 {
    let km1 = (k - 1) as f64;
    let h = |x: f64| km1 * x - x.exp_m1();
    let mut hi = 1.0;
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    bisect(1e-9, hi, |x| h(x) > 0.0)
}

pub fn thresholds(k: usize) -> Result<Thresholds> {
    check_k(k)?;
    let lambda_k = f1_inv(k as f64)?;
    let b = -(-lambda_k).exp_m1();
    let rho_k = k as f64 * b.powi(k as i32 - 1) / lambda_k;
    let theta_k = 1.0 - b.powi(k as i32);
    let x_core = core_argmax(k);
    let rho_core = core_ratio(x_core, k);
    Ok(Thresholds {
        k,
        lambda_k,
        rho_k,
        theta_k,
        rho_core,
        x_core,
    })
}

/// Largest positive `lambda` with `core_ratio(lambda) = rho`, or `None` when
/// `rho` exceeds the maximum of the core ratio.
pub fn lambda_rho(rho: f64, k: usize) -> Result<Option<f64>> {
    check_k(k)?;
    if !(rho > 0.0) {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    let x_core = core_argmax(k);
    if rho > core_ratio(x_core, k) {
        return Ok(None);
    }
    let mut hi = 2.0 * x_core;
    while core_ratio(hi, k) > rho {
        hi *= 2.0;
    }
    Ok(Some(bisect(x_core, hi, |x| core_ratio(x, k) > rho)))
}

/// First scaled time at which the closed-form `y1` reaches zero (1 when it
/// never does).
pub fn theta_star(rho: f64, k: usize) -> Result<f64> {
    Ok(match lambda_rho(rho, k)? {
        None => 1.0,
        Some(l) => 1.0 - (-(-l).exp_m1()).powi(k as i32),
    })
}

/// Mean of `(z1, z2) / n` on the initial configuration-model instance.
pub fn y_init(rho: f64, k: usize) -> Result<Vec2> {
    check_k(k)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    let kf = k as f64;
    let e = (-kf / rho).exp();
    Ok([kf * e, -rho * (-kf / rho).exp_m1() - kf * e])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub y: Vec2,
    /// Set when `theta` lies past the first zero of `y1`, where the formula no
    /// longer describes the peeling chain.
    pub beyond_validity: bool,
}

struct Pieces {
    u: f64,
    w: f64,
    gamma: f64,
    e: f64,
}

fn pieces(theta: f64, rho: f64, k: usize) -> Result<Pieces> {
    check_k(k)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::domain(format!("theta = {theta} outside [0, 1)")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    let kf = k as f64;
    let u = (1.0 - theta).powf(1.0 / kf);
    let w = u.powi(k as i32 - 1);
    let gamma = kf / rho;
    Ok(Pieces {
        u,
        w,
        gamma,
        e: (-gamma * w).exp(),
    })
}

fn closed_values(p: &Pieces, rho: f64, k: usize) -> Vec2 {
    let kf = k as f64;
    let gw = p.gamma * p.w;
    [
        kf * p.w * (p.u - 1.0 + p.e),
        rho * (-(-gw).exp_m1() - gw * p.e),
    ]
}

/// The closed-form solution `y(theta, rho)`.
pub fn y_closed(theta: f64, rho: f64, k: usize) -> Result<ClosedForm> {
    let p = pieces(theta, rho, k)?;
    let y = closed_values(&p, rho, k);
    let beyond_validity = theta > theta_star(rho, k)? + 1e-12;
    Ok(ClosedForm { y, beyond_validity })
}

/// The closed form without the validity check, for callers that already
/// stay inside the window.
pub(crate) fn y_mean(theta: f64, rho: f64, k: usize) -> Result<Vec2> {
    let p = pieces(theta, rho, k)?;
    Ok(closed_values(&p, rho, k))
}

/// `d y / d theta` of the closed form.
pub fn dy_dtheta(theta: f64, rho: f64, k: usize) -> Result<Vec2> {
    let p = pieces(theta, rho, k)?;
    let kf = k as f64;
    let du = -p.u / (kf * (1.0 - theta));
    let dw = -(kf - 1.0) / (kf * p.u);
    let de = -p.gamma * p.e * dw;
    Ok([
        kf * (dw * (p.u - 1.0 + p.e) + p.w * (du + de)),
        -rho * de - kf * (dw * p.e + p.w * de),
    ])
}

/// `d y / d rho` of the closed form.
pub fn dy_drho(theta: f64, rho: f64, k: usize) -> Result<Vec2> {
    let p = pieces(theta, rho, k)?;
    let kf = k as f64;
    let de = p.w * p.e * p.gamma / rho;
    Ok([
        kf * p.w * de,
        -(-p.gamma * p.w).exp_m1() - rho * de - kf * p.w * de,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CritDerivatives {
    /// Left derivative in theta at `(theta_k, rho_k)`.
    pub dy_dtheta: Vec2,
    pub dy_drho: Vec2,
}

/// Derivatives of `y` at the critical point, checked against finite
/// differences of the closed form (one-sided from below in theta).
pub fn crit_derivatives(k: usize) -> Result<CritDerivatives> {
    let t = thresholds(k)?;
    let (th, rho) = (t.theta_k, t.rho_k);
    let dth = dy_dtheta(th, rho, k)?;
    let drho = dy_drho(th, rho, k)?;

    let y = |a: f64, b: f64| y_closed(a, b, k).map(|c| c.y);
    let h = 1e-5;
    let (y0, y1, y2) = (y(th, rho)?, y(th - h, rho)?, y(th - 2.0 * h, rho)?);
    let (yp, ym) = (y(th, rho + h)?, y(th, rho - h)?);
    for i in 0..2 {
        let fd_th = (3.0 * y0[i] - 4.0 * y1[i] + y2[i]) / (2.0 * h);
        let fd_rho = (yp[i] - ym[i]) / (2.0 * h);
        for (name, an, fd) in [("theta", dth[i], fd_th), ("rho", drho[i], fd_rho)] {
            if (an - fd).abs() > 1e-4 * an.abs().max(1e-3) {
                return Err(Error::SelfCheck(format!(
                    "d y{}/d {name}: analytic {an} vs finite difference {fd}",
                    i + 1
                )));
            }
        }
    }
    if !(dth[0] < 0.0 && dth[1] < 0.0) {
        return Err(Error::SelfCheck(format!(
            "theta-derivatives at the critical point must be negative, got {dth:?}"
        )));
    }
    Ok(CritDerivatives {
        dy_dtheta: dth,
        dy_drho: drho,
    })
}

/// `f1(lambda_k) - k`, exposed for diagnostics.
pub fn threshold_residual(t: &Thresholds) -> Result<f64> {
    Ok(f1(t.lambda_k)? - t.k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Golden-section maximisation of the core ratio: independent of the
    /// stationary-point equation used in `thresholds`.
    fn golden_max(k: usize) -> f64 {
        let g = |x: f64| core_ratio(x, k);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.01, 20.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        g(0.5 * (a + b))
    }

    /// Second bisection for f1(l) = k with a different bracket and the naive
    /// formula.
    fn lambda_oracle(k: usize) -> f64 {
        let f = |l: f64| l * (l.exp() - 1.0) / (l.exp() - 1.0 - l) - k as f64;
        let (mut lo, mut hi) = (0.5, 3.0 * k as f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn thresholds_k3_k4() {
        let t = thresholds(3).unwrap();
        assert!((t.lambda_k - 2.149).abs() < 1e-3);
        assert!((t.rho_k - 1.0894).abs() < 5e-4);
        assert!((1.0 / t.rho_k - 0.9179).abs() < 5e-4);
        assert!((t.theta_k - 0.3105).abs() < 1e-3);
        assert!((t.rho_core - 1.2218).abs() < 1e-3);
        assert!(t.rho_core > t.rho_k);
        assert!((t.lambda_k - lambda_oracle(3)).abs() < 1e-10);
        assert!((t.rho_core - golden_max(3)).abs() < 1e-10);

        let t = thresholds(4).unwrap();
        assert!((t.lambda_k - 3.594).abs() < 3e-3);
        assert!((t.rho_k - 1.0238).abs() < 1e-3);
        assert!((t.theta_k - 0.1055).abs() < 1e-3);
        assert!((t.lambda_k - lambda_oracle(4)).abs() < 1e-10);
        assert!((t.rho_core - golden_max(4)).abs() < 1e-10);

        assert!(thresholds(2).is_err());
    }

    #[test]
    fn thresholds_general_k() {
        for k in 3..=16 {
            let t = thresholds(k).unwrap();
            assert!(t.lambda_k > 2.0);
            assert!(threshold_residual(&t).unwrap().abs() < 1e-12);
            assert!(t.theta_k > 0.0 && t.theta_k < 1.0);
            assert!(t.rho_core > t.rho_k);
            assert!((t.rho_core - golden_max(k)).abs() < 1e-9);
            assert!((t.lambda_k - lambda_oracle(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn y_init_examples() {
        let y = y_init(3.0, 3).unwrap();
        assert!((y[0] - 1.10364).abs() < 1e-5);
        assert!((y[1] - 0.79272).abs() < 1e-5);
        let y = y_init(1e6, 3).unwrap();
        assert!((y[0] - 3.0 * (1.0 - 3e-6)).abs() < 1e-10);
        assert!(y_init(0.0, 3).is_err());
        for &rho in &[0.5, 0.9, 1.0894, 1.2, 2.0, 5.0] {
            let a = y_init(rho, 3).unwrap();
            let b = y_closed(0.0, rho, 3).unwrap().y;
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_identities() {
        for k in 3..=8 {
            let t = thresholds(k).unwrap();
            let c = y_closed(t.theta_k, t.rho_k, k).unwrap();
            assert!(c.y[0].abs() < 1e-9, "k={k}: y1 = {}", c.y[0]);
            assert!((c.y[1] - (1.0 - t.theta_k)).abs() < 1e-9);
            assert!(!c.beyond_validity);
            assert!((theta_star(t.rho_k, k).unwrap() - t.theta_k).abs() < 1e-9);
        }
    }

    #[test]
    fn validity_flag_and_domain() {
        let t = thresholds(3).unwrap();
        assert!(
            y_closed(t.theta_k + 0.05, t.rho_k, 3)
                .unwrap()
                .beyond_validity
        );
        assert!(!y_closed(0.5, 1.3, 3).unwrap().beyond_validity);
        assert_eq!(theta_star(1.3, 3).unwrap(), 1.0);
        assert!(y_closed(1.0, 1.0, 3).is_err());
        assert!(y_closed(-0.1, 1.0, 3).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &(th, rho) in &[(0.05, 1.0894), (0.2, 1.0), (0.25, 1.15), (0.1, 1.2)] {
            let h = 1e-6;
            let an_t = dy_dtheta(th, rho, 3).unwrap();
            let an_r = dy_drho(th, rho, 3).unwrap();
            let yp = y_closed(th + h, rho, 3).unwrap().y;
            let ym = y_closed(th - h, rho, 3).unwrap().y;
            let rp = y_closed(th, rho + h, 3).unwrap().y;
            let rm = y_closed(th, rho - h, 3).unwrap().y;
            for i in 0..2 {
                let fd_t = (yp[i] - ym[i]) / (2.0 * h);
                let fd_r = (rp[i] - rm[i]) / (2.0 * h);
                assert!((fd_t - an_t[i]).abs() < 1e-6 * an_t[i].abs().max(1.0));
                assert!((fd_r - an_r[i]).abs() < 1e-6 * an_r[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn crit_derivatives_k3() {
        let t = thresholds(3).unwrap();
        let c = crit_derivatives(3).unwrap();
        assert!((c.dy_dtheta[0] + 0.4327).abs() < 1e-3);
        assert!((c.dy_dtheta[1] + 0.5673).abs() < 1e-3);
        assert!((c.dy_dtheta[0] + c.dy_dtheta[1] + 1.0).abs() < 1e-9);
        let mu = c.dy_drho[0] + c.dy_drho[1];
        let expected = 1.0 - (1.0 + t.lambda_k) * (-t.lambda_k).exp();
        assert!((mu - expected).abs() < 1e-9);
        assert!((mu - 0.6329).abs() < 1e-3);
        for k in 4..=8 {
            assert!(crit_derivatives(k).is_ok());
        }
    }
}
