//! Fluctuations of the peeling chain around its mean: the initial covariance,
//! the covariance ODE `dQ/dtheta = G + A Q + Q A^T`, and its discrete-time
//! counterpart at finite `n`.

use serde::ser::{Serialize, SerializeTuple, Serializer};

use super::kernel::{jacobian_on_branch, kernel_probs, noise_from, Mat2, StatePoint};
use super::ode::{check_k, theta_star, thresholds, y_init, y_mean, Vec2};
use crate::error::{Error, Result};

/// Symmetric 2x2 matrix stored as its upper triangle. Serializes as
/// `[q11, q12, q22]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMatrix2 {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl Serialize for SymMatrix2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        t.serialize_element(&self.q11)?;
        t.serialize_element(&self.q12)?;
        t.serialize_element(&self.q22)?;
        t.end()
    }
}

impl SymMatrix2 {
    pub fn new(q11: f64, q12: f64, q22: f64) -> Self {
        SymMatrix2 { q11, q12, q22 }
    }

    fn from_array(a: [f64; 3]) -> Self {
        SymMatrix2::new(a[0], a[1], a[2])
    }

    fn to_array(self) -> [f64; 3] {
        [self.q11, self.q12, self.q22]
    }

    pub fn det(&self) -> f64 {
        self.q11 * self.q22 - self.q12 * self.q12
    }

    pub fn is_positive_definite(&self) -> bool {
        self.q11 > 0.0 && self.q22 > 0.0 && self.det() > 0.0
    }

    /// `1^T Q 1 = q11 + 2 q12 + q22`.
    pub fn total(&self) -> f64 {
        self.q11 + 2.0 * self.q12 + self.q22
    }

    pub fn max_abs_diff(&self, other: &SymMatrix2) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// `B Q B^T` for a general 2x2 `B`.
    pub fn congruence(&self, b: &Mat2) -> SymMatrix2 {
        let q = [[self.q11, self.q12], [self.q12, self.q22]];
        let mut bq = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                bq[i][j] = b[i][0] * q[0][j] + b[i][1] * q[1][j];
            }
        }
        let e = |i: usize, j: usize| bq[i][0] * b[j][0] + bq[i][1] * b[j][1];
        SymMatrix2::new(e(0, 0), e(0, 1), e(1, 1))
    }

    /// `A Q + Q A^T`.
    fn lyapunov(&self, a: &Mat2) -> SymMatrix2 {
        let Self { q11, q12, q22 } = *self;
        SymMatrix2::new(
            2.0 * (a[0][0] * q11 + a[0][1] * q12),
            a[0][0] * q12 + a[0][1] * q22 + a[1][0] * q11 + a[1][1] * q12,
            2.0 * (a[1][0] * q12 + a[1][1] * q22),
        )
    }

    fn axpy(&self, s: f64, other: &SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(
            self.q11 + s * other.q11,
            self.q12 + s * other.q12,
            self.q22 + s * other.q22,
        )
    }
}

/// Covariance of `(z1, z2) / sqrt(n)` on the initial instance, `gamma = k / rho`.
pub fn q_init(rho: f64, k: usize) -> Result<SymMatrix2> {
    check_k(k)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    let kf = k as f64;
    let g = kf / rho;
    let e2 = (-2.0 * g).exp();
    let em1 = g.exp_m1();
    let outer = (kf / g) * g * e2;
    let q22_pref = (kf / g) * e2;
    Ok(SymMatrix2::new(
        outer * (em1 + g - g * g),
        -outer * (em1 - g * g),
        q22_pref * (em1 + g * (em1 - 1.0) - g * g * (1.0 + g)),
    ))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    Ok(())
}

/// Jacobian and noise along the mean trajectory at scaled time `theta`.
fn coefficients(theta: f64, rho: f64, k: usize) -> Result<(Mat2, SymMatrix2)> {
    let x = StatePoint::new(y_mean(theta, rho, k)?, theta);
    let p = kernel_probs(&x, k)?;
    Ok((jacobian_on_branch(&x, k)?, noise_from(&p, k)))
}

fn q_rhs(theta: f64, q: &SymMatrix2, rho: f64, k: usize) -> Result<SymMatrix2> {
    let (a, g) = coefficients(theta, rho, k)?;
    Ok(q.lyapunov(&a).axpy(1.0, &g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QIntegration {
    pub q: SymMatrix2,
    /// Steps of the accepted run.
    pub steps: usize,
    /// Smallest determinant over all accepted steps.
    pub min_det: f64,
}

fn rk4_run(rho: f64, k: usize, theta_end: f64, steps: usize) -> Result<QIntegration> {
    let h = theta_end / steps as f64;
    let mut q = q_init(rho, k)?;
    let mut min_det = q.det();
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = q_rhs(t, &q, rho, k)?;
        let k2 = q_rhs(t + 0.5 * h, &q.axpy(0.5 * h, &k1), rho, k)?;
        let k3 = q_rhs(t + 0.5 * h, &q.axpy(0.5 * h, &k2), rho, k)?;
        let t_next = if i + 1 == steps { theta_end } else { t + h };
        let k4 = q_rhs(t_next, &q.axpy(h, &k3), rho, k)?;
        let a = [k1, k2, k3, k4].map(SymMatrix2::to_array);
        let mut next = q.to_array();
        for (c, v) in next.iter_mut().enumerate() {
            *v += h / 6.0 * (a[0][c] + 2.0 * a[1][c] + 2.0 * a[2][c] + a[3][c]);
        }
        q = SymMatrix2::from_array(next);
        if !q.is_positive_definite() {
            return Err(Error::Numeric(format!(
                "covariance lost positive definiteness at theta = {t_next}: {q:?}"
            )));
        }
        min_det = min_det.min(q.det());
    }
    Ok(QIntegration { q, steps, min_det })
}

const BASE_STEPS: usize = 1 << 14;
const MAX_HALVINGS: u32 = 4;
const STEP_TOL: f64 = 1e-9;

/// Integrates the covariance ODE from `q_init(rho)` at `theta = 0` to
/// `theta_end` with classical RK4, halving the step until two successive runs
/// agree to `1e-9` in every entry.
pub fn q_integrate_detail(rho: f64, k: usize, theta_end: f64) -> Result<QIntegration> {
    check_k(k)?;
    check_rho(rho)?;
    let limit = theta_star(rho, k)?;
    if !(theta_end >= 0.0) || theta_end > limit + 1e-12 {
        return Err(Error::domain(format!(
            "theta_end = {theta_end} outside [0, {limit}] where y1 stays positive"
        )));
    }
    let theta_end = theta_end.min(limit);
    if theta_end == 0.0 {
        let q = q_init(rho, k)?;
        return Ok(QIntegration {
            q,
            steps: 0,
            min_det: q.det(),
        });
    }
    let mut prev = rk4_run(rho, k, theta_end, BASE_STEPS)?;
    for halving in 1..=MAX_HALVINGS {
        let next = rk4_run(rho, k, theta_end, BASE_STEPS << halving)?;
        let change = next.q.max_abs_diff(&prev.q);
        let min_det = prev.min_det.min(next.min_det);
        if change < STEP_TOL {
            return Ok(QIntegration { min_det, ..next });
        }
        prev = next;
    }
    Err(Error::Numeric(format!(
        "covariance integration to theta = {theta_end} did not converge after {MAX_HALVINGS} step halvings"
    )))
}

pub fn q_integrate(rho: f64, k: usize, theta_end: f64) -> Result<SymMatrix2> {
    q_integrate_detail(rho, k, theta_end).map(|r| r.q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMoments {
    /// Final step `floor(n theta_k)`.
    pub tau_end: usize,
    pub y_star: Vec2,
    pub q: SymMatrix2,
}

/// Runs the finite-`n` mean and covariance recursions
/// `y*(t+1) = y*(t) + (A (y*(t) - y(t/n)) + F(y(t/n))) / n` and
/// `Q(t+1) = B Q(t) B^T + G / n` with `B = I + A / n`, from `t = 0` to
/// `floor(n theta_k)`.
pub fn discrete_moments(n: usize, rho: f64, k: usize) -> Result<DiscreteMoments> {
    check_k(k)?;
    check_rho(rho)?;
    if n < 1000 {
        return Err(Error::invalid(format!(
            "n = {n} too small, need at least 1000"
        )));
    }
    let t = thresholds(k)?;
    let nf = n as f64;
    let tau_end = (nf * t.theta_k).floor() as usize;
    let limit = theta_star(rho, k)?;
    if tau_end as f64 / nf > limit {
        return Err(Error::domain(format!(
            "at rho = {rho} the mean trajectory reaches y1 = 0 at theta = {limit}, before {tau_end}/{n}"
        )));
    }
    let mut y_star = y_init(rho, k)?;
    let mut q = q_init(rho, k)?;
    for tau in 0..tau_end {
        let theta = tau as f64 / nf;
        let y = y_mean(theta, rho, k)?;
        let x = StatePoint::new(y, theta);
        let p = kernel_probs(&x, k)?;
        let a = jacobian_on_branch(&x, k)?;
        let f = super::kernel::drift_from(&p, k);
        let d = [y_star[0] - y[0], y_star[1] - y[1]];
        for i in 0..2 {
            y_star[i] += (a[i][0] * d[0] + a[i][1] * d[1] + f[i]) / nf;
        }
        let b = [
            [1.0 + a[0][0] / nf, a[0][1] / nf],
            [a[1][0] / nf, 1.0 + a[1][1] / nf],
        ];
        q = q.congruence(&b).axpy(1.0 / nf, &noise_from(&p, k));
    }
    Ok(DiscreteMoments { tau_end, y_star, q })
}
