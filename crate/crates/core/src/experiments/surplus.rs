use serde::Serialize;

use super::{check_trials, m_from_rho, par_trials, trial_seed};
use crate::error::Result;
use crate::instance::{m_from_r, Instance};
use crate::peel::core_of;
use crate::stats::Moments;
use crate::theory::{q_init, scaling_constant, y_init, SymMatrix2, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurplusReport {
    pub k: usize,
    pub n: usize,
    pub r: f64,
    pub m: usize,
    pub trials: usize,
    /// Moments of `surplus / sqrt(n)`.
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub skewness: f64,
    /// `r mu`.
    pub theory_mean: f64,
    /// `sigma^2 = 1^T Q(theta_k) 1`.
    pub theory_var: f64,
    pub empty_core_count: usize,
}

/// Moments of the scaled core surplus at `m = floor(n rho_k + r sqrt(n))`.
pub fn surplus_stats(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<SurplusReport> {
    check_trials(trials)?;
    let c = scaling_constant(k)?;
    let m = m_from_r(k, n, r, c.rho_k)?;
    let cores = par_trials(trials, threads, |t| {
        let inst = Instance::generate(k, m, n, trial_seed(seed, &[n as u64, r.to_bits()], t))?;
        let core = core_of(&inst);
        Ok((core.surplus, core.is_empty()))
    })?;
    let sqrt_n = (n as f64).sqrt();
    let mom: Moments = cores.iter().map(|&(s, _)| s as f64 / sqrt_n).collect();
    Ok(SurplusReport {
        k,
        n,
        r,
        m,
        trials,
        mean: mom.mean,
        variance: mom.variance(),
        se: mom.se(),
        skewness: mom.skewness(),
        theory_mean: r * c.mu,
        theory_var: c.sigma * c.sigma,
        empty_core_count: cores.iter().filter(|c| c.1).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialStateReport {
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    pub m: usize,
    pub trials: usize,
    /// Sample mean of `(z1, z2)` before any peeling.
    pub mean: Vec2,
    /// Standard errors of `mean`.
    pub se: Vec2,
    /// `n y_init(rho)`.
    pub expected: Vec2,
    /// Sample covariance of `z / sqrt(n)`.
    pub cov_scaled: SymMatrix2,
    pub q_init: SymMatrix2,
}

/// Distribution of the degree-1 and degree->=2 counts of fresh instances at
/// `m = floor(n rho)`.
pub fn initial_state_stats(
    k: usize,
    n: usize,
    rho: f64,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<InitialStateReport> {
    check_trials(trials)?;
    let m = m_from_rho(n, rho)?;
    let z = par_trials(trials, threads, |t| {
        let inst = Instance::generate(k, m, n, trial_seed(seed, &[n as u64, rho.to_bits()], t))?;
        let d = inst.degrees(&[]);
        Ok([d.z1 as f64, d.z2plus as f64])
    })?;
    let tf = trials as f64;
    let mean = [0, 1].map(|i| z.iter().map(|v| v[i]).sum::<f64>() / tf);
    let cov = |i: usize, j: usize| {
        let denom = (tf - 1.0).max(1.0);
        z.iter()
            .map(|v| (v[i] - mean[i]) * (v[j] - mean[j]))
            .sum::<f64>()
            / denom
    };
    let nf = n as f64;
    let y = y_init(rho, k)?;
    Ok(InitialStateReport {
        k,
        n,
        rho,
        m,
        trials,
        mean,
        se: [0, 1].map(|i| (cov(i, i) / tf).sqrt()),
        expected: [nf * y[0], nf * y[1]],
        cov_scaled: SymMatrix2::new(cov(0, 0) / nf, cov(0, 1) / nf, cov(1, 1) / nf),
        q_init: q_init(rho, k)?,
    })
}
