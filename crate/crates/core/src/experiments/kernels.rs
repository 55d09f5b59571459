use serde::Serialize;

use super::{aux_seed, check_trials, m_from_rho, par_trials, trial_seed};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::peel::{peel_run_with, sample_kernel, PeelRule};
use crate::rng;
use crate::stats::Moments;
use crate::theory::{scaling_constant, theta_star, y_mean, Vec2};

/// Spacing of the theta grid on which the two chains are compared.
pub const GRID_STEP: f64 = 0.01;

/// The grid stops this far before the first zero of the mean `y1`.
pub const GRID_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelGridPoint {
    pub theta: f64,
    pub tau: usize,
    /// Mean and standard deviation of `z / n` under the exact peeling chain.
    pub exact_mean: Vec2,
    pub exact_sd: Vec2,
    /// Same for the chain stepped by the approximate kernel.
    pub approx_mean: Vec2,
    pub approx_sd: Vec2,
    /// Approximate-kernel trials still running at this point.
    pub approx_count: usize,
    /// Mean-field curve `y(theta)`.
    pub theory: Vec2,
    /// `|exact_mean - approx_mean|` (Euclidean norm).
    pub mean_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub trials: usize,
    pub points: Vec<KernelGridPoint>,
    /// Largest `mean_diff` over the grid.
    pub sup_mean_diff: f64,
    /// Approximate chains stopped because their state left the kernel's domain.
    pub truncations: usize,
}

struct TrialPaths {
    exact: Vec<Vec2>,
    approx: Vec<Option<Vec2>>,
    truncated: bool,
}

/// Runs the exact peeling chain and the approximate-kernel chain from the
/// same initial state on each of `trials` instances at `m = floor(n rho)`,
/// and compares the two ensembles on a theta grid. `rule` sets the removal
/// order of the exact chain.
pub fn compare_kernels(
    k: usize,
    n: usize,
    rho: f64,
    trials: usize,
    seed: u64,
    rule: PeelRule,
    threads: Option<usize>,
) -> Result<KernelReport> {
    check_trials(trials)?;
    let c = scaling_constant(k)?;
    let (lo, hi) = (c.rho_k - 0.2, c.rho_core - 0.01);
    if !(lo..=hi).contains(&rho) {
        return Err(Error::invalid(format!(
            "rho = {rho} outside [{lo:.4}, {hi:.4}] where the mean curve is valid"
        )));
    }
    if n < 100 {
        return Err(Error::invalid(format!(
            "n = {n} too small, need at least 100"
        )));
    }
    let m = m_from_rho(n, rho)?;
    let nf = n as f64;
    let theta_end = theta_star(rho, k)? - GRID_MARGIN;
    let taus: Vec<usize> = (0..)
        .map(|i| i as f64 * GRID_STEP)
        .take_while(|&t| t <= theta_end + 1e-12)
        .map(|t| (t * nf).round() as usize)
        .collect();
    let last = *taus.last().expect("grid starts at 0");

    let paths = par_trials(trials, threads, |t| {
        let ts = trial_seed(seed, &[n as u64, rho.to_bits()], t);
        let inst = Instance::generate(k, m, n, ts)?;
        let (trace, _) = peel_run_with(&inst, aux_seed(ts, 0), 1, rule);
        let scaled = |z1: usize, z2: usize| [z1 as f64 / nf, z2 as f64 / nf];
        let exact = taus
            .iter()
            .map(|&tau| {
                let p = trace.steps[tau.min(trace.tau_c)];
                scaled(p.z1, p.z2)
            })
            .collect();

        let mut rng = rng::stream(aux_seed(ts, 1));
        let mut z = [trace.steps[0].z1 as i64, trace.steps[0].z2 as i64];
        let mut approx = Vec::with_capacity(taus.len());
        let mut truncated = false;
        let mut next = 0;
        for tau in 0..=last {
            if taus[next] == tau {
                approx.push(Some([z[0] as f64 / nf, z[1] as f64 / nf]));
                next += 1;
                if next == taus.len() {
                    break;
                }
            }
            let x = [z[0] as f64 / nf, z[1] as f64 / nf];
            match sample_kernel(x, tau as f64 / nf, k, &mut rng) {
                Ok((d1, d2)) => {
                    z[0] += d1;
                    z[1] += d2;
                }
                Err(_) => {
                    truncated = true;
                    break;
                }
            }
        }
        approx.resize(taus.len(), None);
        Ok(TrialPaths {
            exact,
            approx,
            truncated,
        })
    })?;

    let mut points = Vec::with_capacity(taus.len());
    let mut sup_mean_diff: f64 = 0.0;
    for (i, &tau) in taus.iter().enumerate() {
        let ex: [Moments; 2] = [0, 1].map(|c| paths.iter().map(|p| p.exact[i][c]).collect());
        let ap: [Moments; 2] = [0, 1].map(|c| {
            paths
                .iter()
                .filter_map(|p| p.approx[i])
                .map(|v| v[c])
                .collect()
        });
        let exact_mean = [ex[0].mean, ex[1].mean];
        let approx_mean = [ap[0].mean, ap[1].mean];
        let approx_count = ap[0].count as usize;
        let mean_diff = if approx_count > 0 {
            (exact_mean[0] - approx_mean[0]).hypot(exact_mean[1] - approx_mean[1])
        } else {
            f64::NAN
        };
        if mean_diff.is_finite() {
            sup_mean_diff = sup_mean_diff.max(mean_diff);
        }
        let theta = tau as f64 / nf;
        points.push(KernelGridPoint {
            theta,
            tau,
            exact_mean,
            exact_sd: [ex[0].sd(), ex[1].sd()],
            approx_mean,
            approx_sd: [ap[0].sd(), ap[1].sd()],
            approx_count,
            theory: y_mean(theta, rho, k)?,
            mean_diff,
        });
    }
    Ok(KernelReport {
        k,
        n,
        m,
        rho,
        trials,
        points,
        sup_mean_diff,
        truncations: paths.iter().filter(|p| p.truncated).count(),
    })
}
