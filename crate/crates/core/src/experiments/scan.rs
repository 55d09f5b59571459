use serde::Serialize;

use super::{
    check_trials, exact_sat_on_core, par_trials, run_trial, surplus_sat, trial_seed, SatMode,
};
use crate::error::{Error, Result};
use crate::instance::{m_from_r, Instance};
use crate::peel::core_of;
use crate::stats::{wilson_interval, Moments, Z95};
use crate::theory::scaling_constant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub k: usize,
    pub n_values: Vec<usize>,
    pub r_values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub sat_mode: SatMode,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!(
                "arity k = {} must be at least 3",
                self.k
            )));
        }
        check_trials(self.trials)?;
        if self.n_values.is_empty() || self.r_values.is_empty() {
            return Err(Error::invalid("scan needs at least one n and one r"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be at least 1"));
        }
        let min_n = match self.sat_mode {
            SatMode::ExactGf2OnCore => 1,
            SatMode::SurplusSign => 100,
        };
        if let Some(&n) = self.n_values.iter().find(|&&n| n < min_n) {
            return Err(Error::invalid(format!(
                "n = {n} below {min_n} for sat mode {}",
                self.sat_mode
            )));
        }
        if let Some(r) = self.r_values.iter().find(|r| !r.is_finite()) {
            return Err(Error::invalid(format!("r = {r} must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub k: usize,
    pub n: usize,
    pub r: f64,
    pub m: usize,
    pub trials: usize,
    pub sat_count: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub phi_pred: f64,
    pub surplus_mean_scaled: f64,
    pub surplus_var_scaled: f64,
    pub core_n_mean: f64,
    pub core_m_mean: f64,
    pub empty_core_count: usize,
}

/// Estimates the satisfiability probability on every `(n, r)` cell of the
/// grid, with `m = floor(n rho_k + r sqrt(n))`.
pub fn run_scan(cfg: &ScanConfig) -> Result<Vec<ScanRow>> {
    cfg.validate()?;
    let c = scaling_constant(cfg.k)?;
    let mut cells = Vec::new();
    for &n in &cfg.n_values {
        for &r in &cfg.r_values {
            cells.push((n, r, m_from_r(cfg.k, n, r, c.rho_k)?));
        }
    }
    cells
        .into_iter()
        .map(|(n, r, m)| {
            let outcomes = par_trials(cfg.trials, cfg.threads, |t| {
                let seed = trial_seed(cfg.master_seed, &[n as u64, r.to_bits()], t);
                run_trial(cfg.k, m, n, seed, cfg.sat_mode)
            })?;
            let sat_count = outcomes.iter().filter(|o| o.sat).count();
            let sqrt_n = (n as f64).sqrt();
            let surplus: Moments = outcomes
                .iter()
                .map(|o| o.core.surplus as f64 / sqrt_n)
                .collect();
            let trials = outcomes.len() as f64;
            let (ci_lo, ci_hi) = wilson_interval(sat_count, cfg.trials, Z95);
            Ok(ScanRow {
                k: cfg.k,
                n,
                r,
                m,
                trials: cfg.trials,
                sat_count,
                p_hat: sat_count as f64 / trials,
                ci_lo,
                ci_hi,
                phi_pred: c.phi(r),
                surplus_mean_scaled: surplus.mean,
                surplus_var_scaled: surplus.variance(),
                core_n_mean: outcomes.iter().map(|o| o.core.n_core as f64).sum::<f64>() / trials,
                core_m_mean: outcomes.iter().map(|o| o.core.m_core as f64).sum::<f64>() / trials,
                empty_core_count: outcomes.iter().filter(|o| o.core.is_empty()).count(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub k: usize,
    pub n: usize,
    pub r: f64,
    pub m: usize,
    pub trials: usize,
    pub exact_sat: usize,
    pub surplus_sat: usize,
    /// Trials on which the two verdicts differ.
    pub disagreements: usize,
    pub fraction: f64,
}

/// Decides every trial both exactly and by the surplus sign and counts the
/// disagreements.
pub fn sat_mode_agreement(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<AgreementReport> {
    check_trials(trials)?;
    let c = scaling_constant(k)?;
    let m = m_from_r(k, n, r, c.rho_k)?;
    let verdicts = par_trials(trials, threads, |t| {
        let inst = Instance::generate(k, m, n, trial_seed(seed, &[n as u64, r.to_bits()], t))?;
        let core = core_of(&inst);
        Ok((exact_sat_on_core(&inst, &core), surplus_sat(&core)))
    })?;
    let disagreements = verdicts.iter().filter(|(a, b)| a != b).count();
    Ok(AgreementReport {
        k,
        n,
        r,
        m,
        trials,
        exact_sat: verdicts.iter().filter(|v| v.0).count(),
        surplus_sat: verdicts.iter().filter(|v| v.1).count(),
        disagreements,
        fraction: disagreements as f64 / trials as f64,
    })
}
