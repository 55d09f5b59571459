use rayon::prelude::*;
use serde::Serialize;

use super::{aux_seed, check_trials, m_from_rho, trial_seed, with_threads};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::peel::{peel_run_with, PeelRule};
use crate::theory::{scaling_constant, theta_star, y_mean};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajConfig {
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    /// Steps beyond `n (1 - epsilon)` are not compared.
    pub epsilon: f64,
    /// Only every `stride`-th step is recorded.
    pub stride: usize,
    /// Removal order of the peeling runs.
    pub rule: PeelRule,
    pub threads: Option<usize>,
}

impl TrajConfig {
    pub fn new(k: usize, n: usize, rho: f64, trials: usize, seed: u64) -> Self {
        TrajConfig {
            k,
            n,
            rho,
            trials,
            seed,
            epsilon: 0.01,
            stride: 1,
            rule: PeelRule::UniformDegreeOneVariable,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajPoint {
    pub tau: usize,
    pub z1_mean: f64,
    pub z2_mean: f64,
    /// `n y1(tau / n)`.
    pub y1_theory: f64,
    /// `n y2(tau / n)`.
    pub y2_theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub trials: usize,
    /// Last compared step.
    pub tau_max: usize,
    pub points: Vec<TrajPoint>,
    /// `sup_tau |mean z(tau) - n y(tau / n)|` (Euclidean norm).
    pub max_dev: f64,
    /// `max_dev / sqrt(n ln n)`.
    pub normalized_dev: f64,
}

/// Averages exact peeling trajectories at `m = floor(n rho)` and measures
/// their distance from the mean-field curve. A trajectory that stops before
/// `tau` contributes its final state. The comparison ends at
/// `min(n (1 - epsilon), n theta*(rho))`, where the mean curve leaves the
/// region it describes.
pub fn run_trajectory(cfg: &TrajConfig) -> Result<TrajReport> {
    let &TrajConfig {
        k,
        n,
        rho,
        trials,
        seed,
        epsilon,
        ..
    } = cfg;
    check_trials(trials)?;
    let c = scaling_constant(k)?;
    let (lo, hi) = (c.rho_k - 0.2, c.rho_core - 0.01);
    if !(lo..=hi).contains(&rho) {
        return Err(Error::invalid(format!(
            "rho = {rho} outside [{lo:.4}, {hi:.4}] where the mean curve is valid"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let m = m_from_rho(n, rho)?;
    let stride = cfg.stride.max(1);
    let nf = n as f64;
    let tau_max = ((nf * (1.0 - epsilon)).floor()).min((nf * theta_star(rho, k)?).floor()) as usize;
    let grid = tau_max / stride + 1;

    let sums = with_threads(cfg.threads, || {
        (0..trials as u64)
            .into_par_iter()
            .try_fold(
                || vec![0u64; 2 * grid],
                |mut acc, t| -> Result<Vec<u64>> {
                    let ts = trial_seed(seed, &[n as u64, rho.to_bits()], t);
                    let inst = Instance::generate(k, m, n, ts)?;
                    let (trace, _) = peel_run_with(&inst, aux_seed(ts, 0), stride, cfg.rule);
                    let last = *trace
                        .steps
                        .last()
                        .expect("trace ends with the stopping point");
                    for i in 0..grid {
                        let p = if i * stride < trace.tau_c {
                            trace.steps[i]
                        } else {
                            last
                        };
                        acc[2 * i] += p.z1 as u64;
                        acc[2 * i + 1] += p.z2 as u64;
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; 2 * grid],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    })?;

    let tf = trials as f64;
    let mut points = Vec::with_capacity(grid);
    let mut max_dev: f64 = 0.0;
    for i in 0..grid {
        let tau = i * stride;
        let y = y_mean(tau as f64 / nf, rho, k)?;
        let p = TrajPoint {
            tau,
            z1_mean: sums[2 * i] as f64 / tf,
            z2_mean: sums[2 * i + 1] as f64 / tf,
            y1_theory: nf * y[0],
            y2_theory: nf * y[1],
        };
        max_dev = max_dev.max((p.z1_mean - p.y1_theory).hypot(p.z2_mean - p.y2_theory));
        points.push(p);
    }
    let scale = (nf * nf.ln()).sqrt();
    Ok(TrajReport {
        k,
        n,
        m,
        rho,
        trials,
        tau_max,
        points,
        max_dev,
        normalized_dev: if scale > 0.0 {
            max_dev / scale
        } else {
            f64::INFINITY
        },
    })
}
