//! The approximate one-step kernel of the peeling chain at a scaled state.
//!
//! A removed equation carries one degree-1 slot plus `k - 1` further slots,
//! each independently of "degree 1" (`p0`), "degree 2" (`p1`) or
//! "degree >= 3" (`p2`) type. The tilt `lambda` of the truncated Poisson degree law
//! solves `f1(lambda) = (k(1 - theta) - max(x1, 0)) / x2`.

use serde::Serialize;

use super::covariance::SymMatrix2;
use super::ode::{check_k, Vec2};
use super::special::{f1_inv, f1_prime, tilt_ratio};
use crate::error::{Error, Result};

/// Scaled state `(x1, x2) = z / n` at scaled time `theta = tau / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatePoint {
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
}

impl StatePoint {
    pub fn new(x: Vec2, theta: f64) -> Self {
        StatePoint {
            x1: x[0],
            x2: x[1],
            theta,
        }
    }

    /// Remaining slot budget per equation, `k (1 - theta)`.
    fn budget(&self, k: usize) -> f64 {
        k as f64 * (1.0 - self.theta)
    }

    pub fn check_admissible(&self, k: usize) -> Result<()> {
        check_k(k)?;
        let finite = self.x1.is_finite() && self.x2.is_finite() && self.theta.is_finite();
        if !finite || !(0.0..1.0).contains(&self.theta) {
            return Err(Error::domain(format!(
                "state {self:?} has theta outside [0, 1)"
            )));
        }
        if self.x2 < 0.0 {
            return Err(Error::domain(format!("state {self:?} has x2 < 0")));
        }
        let s = self.budget(k);
        let used = self.x1.max(0.0) + 2.0 * self.x2;
        if used > s * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::domain(format!(
                "state {self:?} uses {used} slots per equation, budget is {s}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelProbs {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    /// Tilt; `+inf` when `x2 = 0`, `0` on the boundary `x1 + 2 x2 = k(1 - theta)`.
    pub lambda: f64,
}

pub fn kernel_probs(x: &StatePoint, k: usize) -> Result<KernelProbs> {
    x.check_admissible(k)?;
    let s = x.budget(k);
    let x1p = x.x1.max(0.0);
    let p0 = (x1p / s).min(1.0);
    if x.x2 == 0.0 {
        return Ok(KernelProbs {
            p0,
            p1: 0.0,
            p2: 1.0 - p0,
            lambda: f64::INFINITY,
        });
    }
    let rhs = (s - x1p) / x.x2;
    if rhs <= 2.0 {
        // boundary: lambda -> 0 limit (also absorbs rounding past the budget)
        return Ok(KernelProbs {
            p0,
            p1: 1.0 - p0,
            p2: 0.0,
            lambda: 0.0,
        });
    }
    let lambda = f1_inv(rhs)?;
    Ok(KernelProbs {
        p0,
        p1: x.x2 * tilt_ratio(lambda) / s,
        p2: (x.x2 * lambda / s).min(1.0 - p0),
        lambda,
    })
}

/// Mean one-step increment of `z`: `(-1 + (k-1)(p1 - p0), -(k-1) p1)`.
pub fn drift_from(p: &KernelProbs, k: usize) -> Vec2 {
    let km1 = (k - 1) as f64;
    [-1.0 + km1 * (p.p1 - p.p0), -km1 * p.p1]
}

pub fn drift(x: &StatePoint, k: usize) -> Result<Vec2> {
    Ok(drift_from(&kernel_probs(x, k)?, k))
}

/// Covariance of the one-step increment under the kernel.
pub fn noise_from(p: &KernelProbs, k: usize) -> SymMatrix2 {
    let km1 = (k - 1) as f64;
    let (p0, p1) = (p.p0, p.p1);
    SymMatrix2 {
        q11: km1 * (p0 + p1 - (p0 - p1) * (p0 - p1)),
        q12: -km1 * (p0 * p1 + p1 * (1.0 - p1)),
        q22: km1 * p1 * (1.0 - p1),
    }
}

pub fn noise_cov(x: &StatePoint, k: usize) -> Result<SymMatrix2> {
    Ok(noise_from(&kernel_probs(x, k)?, k))
}

pub type Mat2 = [[f64; 2]; 2];

/// `A[a][b] = d F_a / d x_b`, defined for `x1 > 0`.
pub fn jacobian(x: &StatePoint, k: usize) -> Result<Mat2> {
    if !(x.x1 > 0.0) {
        return Err(Error::domain(format!(
            "jacobian needs x1 > 0 (max(x1, 0) has a kink at 0), got x1 = {}",
            x.x1
        )));
    }
    jacobian_on_branch(x, k)
}

/// Jacobian on the `x1 >= 0` branch; at `x1 = 0` this is the one-sided limit
/// from `x1 > 0`. Slightly negative `x1` from rounding is clamped to 0.
pub(crate) fn jacobian_on_branch(x: &StatePoint, k: usize) -> Result<Mat2> {
    let x = StatePoint {
        x1: x.x1.max(0.0),
        ..*x
    };
    let p = kernel_probs(&x, k)?;
    if !(x.x2 > 0.0) {
        return Err(Error::domain("jacobian needs x2 > 0"));
    }
    let s = x.budget(k);
    let rhs = (s - x.x1) / x.x2;
    let fp = f1_prime(p.lambda)?;
    // p2 = x2 lambda / s with f1(lambda) = rhs; p1 = 1 - p0 - p2
    let dl_dx1 = -1.0 / (x.x2 * fp);
    let dl_dx2 = -rhs / (x.x2 * fp);
    let dp2_dx1 = x.x2 * dl_dx1 / s;
    let dp2_dx2 = (p.lambda + x.x2 * dl_dx2) / s;
    let dp0_dx1 = 1.0 / s;
    let dp1_dx1 = -dp0_dx1 - dp2_dx1;
    let dp1_dx2 = -dp2_dx2;
    let km1 = (k - 1) as f64;
    Ok([
        [km1 * (dp1_dx1 - dp0_dx1), km1 * dp1_dx2],
        [-km1 * dp1_dx1, -km1 * dp1_dx2],
    ])
}
