//! Analytic side: the degree function `f1`, thresholds, the mean trajectory,
//! the peeling kernel and the covariance of the fluctuations around it.

mod covariance;
mod kernel;
mod ode;
mod special;

use std::sync::OnceLock;

use serde::Serialize;

pub use covariance::{
    discrete_moments, q_init, q_integrate, q_integrate_detail, DiscreteMoments, QIntegration,
    SymMatrix2,
};
pub use kernel::{
    drift, drift_from, jacobian, kernel_probs, noise_cov, noise_from, KernelProbs, Mat2, StatePoint,
};
pub use ode::{
    core_ratio, crit_derivatives, dy_drho, dy_dtheta, lambda_rho, theta_star, threshold_residual,
    thresholds, y_closed, y_init, ClosedForm, CritDerivatives, Thresholds, Vec2,
};
pub use special::{f1, f1_inv, f1_prime, normal_cdf};

pub(crate) use ode::y_mean;

use crate::error::{Error, Result};

/// Everything needed to state the scaling law `P(sat) ~ Phi(r s_k)` at arity `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub k: usize,
    pub lambda_k: f64,
    pub rho_k: f64,
    pub theta_k: f64,
    pub rho_core: f64,
    /// Mean state `(y1, y2)` at `(theta_k, rho_k)`.
    pub y_crit: Vec2,
    /// Left derivative of `y` in theta at the critical point.
    pub dy_dtheta: Vec2,
    pub dy_drho: Vec2,
    /// Covariance at `(theta_k, rho_k)`.
    #[serde(rename = "Q_crit")]
    pub q_crit: SymMatrix2,
    /// `d(y1 + y2)/d rho`: the drift of the scaled core surplus per unit `r`.
    pub mu: f64,
    /// Standard deviation of the scaled core surplus, `sqrt(1^T Q 1)`.
    pub sigma: f64,
    pub s_k: f64,
}

impl TheoryConstants {
    /// Predicted satisfiability probability `Phi(r s_k)`.
    pub fn phi(&self, r: f64) -> f64 {
        normal_cdf(r * self.s_k)
    }
}

fn compute_constants(k: usize) -> Result<TheoryConstants> {
    let t = thresholds(k)?;
    let y_crit = y_closed(t.theta_k, t.rho_k, k)?.y;
    let d = crit_derivatives(k)?;
    let q_crit = q_integrate(t.rho_k, k, t.theta_k)?;
    let mu = d.dy_drho[0] + d.dy_drho[1];
    let var = q_crit.total();
    if !(mu > 0.0) {
        return Err(Error::SelfCheck(format!(
            "surplus drift mu = {mu} must be positive"
        )));
    }
    if !(var > 0.0) {
        return Err(Error::SelfCheck(format!(
            "surplus variance {var} must be positive"
        )));
    }
    let sigma = var.sqrt();
    Ok(TheoryConstants {
        k,
        lambda_k: t.lambda_k,
        rho_k: t.rho_k,
        theta_k: t.theta_k,
        rho_core: t.rho_core,
        y_crit,
        dy_dtheta: d.dy_dtheta,
        dy_drho: d.dy_drho,
        q_crit,
        mu,
        sigma,
        s_k: mu / sigma,
    })
}

const CACHED_K: std::ops::RangeInclusive<usize> = 3..=16;

static CACHE: [OnceLock<Result<TheoryConstants>>; 14] = [const { OnceLock::new() }; 14];

/// All constants for arity `k`, computed once per `k` in `3..=16` and cached.
pub fn scaling_constant(k: usize) -> Result<TheoryConstants> {
    if CACHED_K.contains(&k) {
        CACHE[k - 3].get_or_init(|| compute_constants(k)).clone()
    } else {
        compute_constants(k)
    }
}
