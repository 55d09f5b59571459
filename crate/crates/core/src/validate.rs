//! A quick self-test of the invariants every module promises, run by the
//! `validate` subcommand. Each check uses fixed seeds and finishes in well
//! under a second or two.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiments::{run_scan, trial_seed, SatMode, ScanConfig};
use crate::gf2::{Gf2System, SparseSystem};
use crate::instance::Instance;
use crate::peel::{core_of, peel_run};
use crate::rng;
use crate::theory::{
    crit_derivatives, drift, f1, jacobian, kernel_probs, noise_cov, q_init, q_integrate_detail,
    scaling_constant, theta_star, thresholds, y_closed, y_init, StatePoint,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// A check either passes or fails with a detail line; `Err` means it could
/// not run at all.
type Outcome = Result<std::result::Result<String, String>>;

fn check(name: &'static str, body: impl FnOnce() -> Outcome) -> Check {
    match body() {
        Ok(Ok(detail)) => Check {
            name,
            passed: true,
            detail,
        },
        Ok(Err(detail)) => Check {
            name,
            passed: false,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn verdict(ok: bool, detail: String) -> std::result::Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn thresholds_k3() -> Outcome {
    let t = thresholds(3)?;
    let ok = (t.lambda_k - 2.149).abs() <= 1e-3
        && (t.rho_k - 1.0894).abs() <= 5e-4
        && (t.theta_k - 0.3105).abs() <= 1e-3
        && (t.rho_core - 1.2218).abs() <= 1e-3
        && (thresholds(4)?.rho_k - 1.0238).abs() <= 1e-3;
    Ok(verdict(
        ok,
        format!(
            "lambda {:.6} rho {:.6} theta {:.6} rho_core {:.6}",
            t.lambda_k, t.rho_k, t.theta_k, t.rho_core
        ),
    ))
}

fn critical_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 3..=8 {
        let t = thresholds(k)?;
        let y = y_closed(t.theta_k, t.rho_k, k)?.y;
        let d = crit_derivatives(k)?;
        let mu = 1.0 - (1.0 + t.lambda_k) * (-t.lambda_k).exp();
        for e in [
            y[0],
            y[1] - (1.0 - t.theta_k),
            f1(t.lambda_k)? - k as f64,
            d.dy_dtheta[0] + d.dy_dtheta[1] + 1.0,
            d.dy_drho[0] + d.dy_drho[1] - mu,
        ] {
            worst = worst.max(e.abs());
        }
    }
    Ok(verdict(
        worst <= 1e-9,
        format!("largest residual {worst:.3e} over k = 3..8"),
    ))
}

fn kernel_consistency() -> Outcome {
    let mut rng = rng::stream(0x5eed);
    let (mut worst_sum, mut worst_jac, mut bad_psd) = (0.0f64, 0.0f64, 0usize);
    for i in 0..2000 {
        let k = 3 + i % 3;
        let theta = rng.random_range(0.0..0.8);
        let s = k as f64 * (1.0 - theta);
        let x1 = rng.random_range(0.05..s - 0.2);
        let x2 = rng.random_range(0.05..((s - x1) / 2.0).max(0.06));
        let x = StatePoint { x1, x2, theta };
        if x.check_admissible(k).is_err() || x1 + 2.0 * x2 > s - 0.05 {
            continue;
        }
        let p = kernel_probs(&x, k)?;
        worst_sum = worst_sum.max((p.p0 + p.p1 + p.p2 - 1.0).abs());
        let g = noise_cov(&x, k)?;
        if g.q22 < 0.0 || g.det() < -1e-12 {
            bad_psd += 1;
        }
        if i % 10 == 0 {
            let a = jacobian(&x, k)?;
            let h = 1e-6;
            #[allow(clippy::needless_range_loop)]
            for b in 0..2 {
                let (mut xp, mut xm) = (x, x);
                if b == 0 {
                    xp.x1 += h;
                    xm.x1 -= h;
                } else {
                    xp.x2 += h;
                    xm.x2 -= h;
                }
                let (fp, fm) = (drift(&xp, k)?, drift(&xm, k)?);
                for r in 0..2 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    worst_jac = worst_jac.max((fd - a[r][b]).abs() / a[r][b].abs().max(1.0));
                }
            }
        }
    }
    Ok(verdict(
        worst_sum <= 1e-12 && worst_jac <= 1e-6 && bad_psd == 0,
        format!("sum residual {worst_sum:.1e}, jacobian rel. error {worst_jac:.1e}, non-psd noise {bad_psd}"),
    ))
}

fn ode_solution() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in [3, 4] {
        let t = thresholds(k)?;
        for rho in [t.rho_k - 0.01, t.rho_k, t.rho_k + 0.01] {
            let end = t.theta_k.min(theta_star(rho, k)?) - 1e-3;
            let h = 1e-5;
            for i in 0..=50 {
                let theta = (end * i as f64 / 50.0).clamp(h, end - h);
                let yp = y_closed(theta + h, rho, k)?.y;
                let ym = y_closed(theta - h, rho, k)?.y;
                let f = drift(&StatePoint::new(y_closed(theta, rho, k)?.y, theta), k)?;
                for c in 0..2 {
                    worst = worst.max(((yp[c] - ym[c]) / (2.0 * h) - f[c]).abs());
                }
            }
        }
        let y0 = y_init(t.rho_k, k)?;
        let yc = y_closed(0.0, t.rho_k, k)?.y;
        worst = worst.max((y0[0] - yc[0]).abs()).max((y0[1] - yc[1]).abs());
    }
    Ok(verdict(
        worst <= 1e-6,
        format!("largest |dy/dtheta - F| {worst:.2e}"),
    ))
}

fn covariance() -> Outcome {
    let c = scaling_constant(3)?;
    let q0 = q_init(3.0, 3)?;
    let r = q_integrate_detail(c.rho_k, 3, c.theta_k - 1e-6)?;
    let ok = (q0.q11 - 0.6977).abs() < 5e-4
        && (q0.q12 + 0.2917).abs() < 5e-4
        && (q0.q22 - 0.1773).abs() < 5e-4
        && r.min_det > 0.0
        && c.q_crit.is_positive_definite();
    let mut positive = true;
    for k in 3..=8 {
        let ck = scaling_constant(k)?;
        positive &= ck.mu > 0.0 && ck.s_k > 0.0;
    }
    Ok(verdict(
        ok && positive,
        format!(
            "s_3 = {:.6}, min det along the path {:.3e}",
            c.s_k, r.min_det
        ),
    ))
}

fn instances() -> Outcome {
    for t in 0..200 {
        let inst = Instance::generate(3 + (t % 3) as usize, 20 + t as usize, 15 + t as usize, t)?;
        if Instance::decode(&inst.encode())? != inst {
            return Ok(Err(format!("round trip failed for seed {t}")));
        }
        let d = inst.degrees(&[]);
        if d.total() != (inst.k() * inst.n()) as u64 || d.z0 + d.z1 + d.z2plus != inst.m() {
            return Ok(Err(format!("degree table inconsistent for seed {t}")));
        }
    }
    Ok(Ok("200 round trips and degree tables".into()))
}

fn solver_oracles() -> Outcome {
    let mut rng = rng::stream(77);
    for t in 0..300 {
        let m = rng.random_range(1..=12);
        let n = rng.random_range(0..=16);
        let inst = Instance::generate(3, m, n, trial_seed(77, &[], t))?;
        let dense = Gf2System::from_instance(&inst, None);
        let sol = dense.solve(true);
        if sol.satisfiable != dense.brute_force()? {
            return Ok(Err(format!(
                "dense solve disagrees with brute force (trial {t})"
            )));
        }
        if let Some(w) = &sol.witness {
            if !dense.is_satisfied_by(w) {
                return Ok(Err(format!(
                    "witness does not satisfy the system (trial {t})"
                )));
            }
        }
        let sparse = SparseSystem::from_instance(&inst, None).solve(false);
        if (sparse.rank_a, sparse.rank_ab) != (sol.rank_a, sol.rank_ab) {
            return Ok(Err(format!("sparse ranks differ from dense (trial {t})")));
        }
    }
    Ok(Ok("300 small systems".into()))
}

fn peeling() -> Outcome {
    for t in 0..40 {
        let inst = Instance::generate(3, 110, 100, trial_seed(9, &[], t))?;
        let reference = core_of(&inst);
        for s in 0..5 {
            let (trace, core) = peel_run(&inst, s);
            if core != reference {
                return Ok(Err(format!("core depends on removal order (instance {t})")));
            }
            if trace
                .steps
                .iter()
                .any(|p| p.z1 + 2 * p.z2 > 3 * (100 - p.tau))
            {
                return Ok(Err(format!(
                    "trace violates the slot budget (instance {t})"
                )));
            }
        }
        let small = Instance::generate(3, 12, 14, trial_seed(10, &[], t))?;
        let core = core_of(&small);
        let whole = Gf2System::from_instance(&small, None).brute_force()?;
        let sub = Gf2System::from_instance(&small, Some(&core.core_eq_indices)).brute_force()?;
        if whole != sub {
            return Ok(Err(format!("core changes satisfiability (instance {t})")));
        }
    }
    Ok(Ok("40 instances x 5 removal orders".into()))
}

fn scan_determinism() -> Outcome {
    let mut cfg = ScanConfig {
        k: 3,
        n_values: vec![300],
        r_values: vec![-1.0, 0.0, 1.0],
        trials: 30,
        master_seed: 11,
        sat_mode: SatMode::ExactGf2OnCore,
        threads: Some(1),
    };
    let a = run_scan(&cfg)?;
    cfg.threads = Some(2);
    let b = run_scan(&cfg)?;
    let consistent = a.iter().all(|r| r.ci_lo <= r.p_hat && r.p_hat <= r.ci_hi);
    Ok(verdict(
        a == b && consistent,
        "identical rows for 1 and 2 threads".into(),
    ))
}

/// Runs every check and reports each outcome.
pub fn run_all() -> Vec<Check> {
    vec![
        check("thresholds", thresholds_k3),
        check("critical identities", critical_identities),
        check("kernel and jacobian", kernel_consistency),
        check("mean trajectory solves the ODE", ode_solution),
        check("covariance", covariance),
        check("instance encoding and degrees", instances),
        check("gf2 solvers", solver_oracles),
        check("peeling", peeling),
        check("scan determinism", scan_determinism),
    ]
}
