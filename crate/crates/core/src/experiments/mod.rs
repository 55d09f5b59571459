//! Seeded Monte Carlo experiments.
//!
//! Every trial is a pure function of its derived seed: the instance is drawn
//! from the trial seed itself and any random peeling order or kernel chain
//! uses a separate stream derived from it. Results are gathered in trial
//! order, so the thread count never changes the output.

mod kernels;
mod output;
mod scan;
mod surplus;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use kernels::{compare_kernels, KernelGridPoint, KernelReport};
pub use output::{scan_csv, to_csv, traj_csv, Csv};
pub use scan::{run_scan, sat_mode_agreement, AgreementReport, ScanConfig, ScanRow};
pub use surplus::{initial_state_stats, surplus_stats, InitialStateReport, SurplusReport};
pub use trajectory::{run_trajectory, TrajConfig, TrajPoint, TrajReport};

use crate::error::{Error, Result};
use crate::gf2::SparseSystem;
use crate::instance::Instance;
use crate::peel::{core_of, CoreResult};
use crate::rng::stream_seed;

/// How a trial decides satisfiability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SatMode {
    /// Gaussian elimination over GF(2) on the 2-core subsystem.
    ExactGf2OnCore,
    /// Declares the instance satisfiable when the core surplus is >= 0.
    SurplusSign,
}

impl FromStr for SatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-gf2-on-core" => Ok(SatMode::ExactGf2OnCore),
            "surplus" | "surplus-sign" => Ok(SatMode::SurplusSign),
            other => Err(Error::invalid(format!(
                "unknown sat mode {other:?}, expected exact or surplus"
            ))),
        }
    }
}

impl fmt::Display for SatMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SatMode::ExactGf2OnCore => "exact",
            SatMode::SurplusSign => "surplus",
        })
    }
}

/// Seed of trial `trial` in the cell keyed by `key` (for example `(n, r)`).
pub fn trial_seed(master: u64, key: &[u64], trial: u64) -> u64 {
    let cell = key.iter().fold(master, |s, &k| stream_seed(s, k));
    stream_seed(cell, trial)
}

/// Seed of the removal-order or kernel stream belonging to a trial.
pub(crate) fn aux_seed(trial_seed: u64, purpose: u64) -> u64 {
    stream_seed(trial_seed, purpose + 1)
}

/// Outcome of one instance: its core and the satisfiability verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub core: CoreResult,
    pub sat: bool,
}

/// Satisfiability of an instance decided on its 2-core by exact elimination.
pub fn exact_sat_on_core(inst: &Instance, core: &CoreResult) -> bool {
    if core.is_empty() {
        return true;
    }
    SparseSystem::from_instance(inst, Some(&core.core_eq_indices))
        .solve(false)
        .satisfiable
}

/// Surplus-sign verdict; an empty core counts as satisfiable.
pub fn surplus_sat(core: &CoreResult) -> bool {
    core.is_empty() || core.surplus >= 0
}

pub fn run_trial(k: usize, m: usize, n: usize, seed: u64, mode: SatMode) -> Result<TrialOutcome> {
    let inst = Instance::generate(k, m, n, seed)?;
    let core = core_of(&inst);
    let sat = match mode {
        SatMode::ExactGf2OnCore => exact_sat_on_core(&inst, &core),
        SatMode::SurplusSign => surplus_sat(&core),
    };
    Ok(TrialOutcome { core, sat })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub(crate) fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::invalid("thread count must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

/// Maps `f` over `0..trials` in parallel, keeping trial order.
pub(crate) fn par_trials<T, F>(trials: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    with_threads(threads, || {
        (0..trials as u64)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<T>>>()
    })
}

pub(crate) fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    Ok(())
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho = {rho} must be positive")));
    }
    Ok(())
}

/// Variable count `floor(n rho)` for a direct ratio.
pub(crate) fn m_from_rho(n: usize, rho: f64) -> Result<usize> {
    check_rho(rho)?;
    let m = (n as f64 * rho).floor();
    if m > u32::MAX as f64 {
        return Err(Error::invalid("variable count exceeds the supported range"));
    }
    Ok(m as usize)
}
