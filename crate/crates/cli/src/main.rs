//! `xorsat`: command-line access to the k-XORSAT scaling toolkit.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use xorsat_scaling::experiments::{
    compare_kernels, run_scan, run_trajectory, scan_csv, surplus_stats, to_csv, traj_csv, Csv,
    SatMode, ScanConfig, TrajConfig,
};
use xorsat_scaling::gf2::SparseSystem;
use xorsat_scaling::instance::{m_from_r, Instance};
use xorsat_scaling::peel::{peel_run_with, PeelRule};
use xorsat_scaling::stats::fmt_g9;
use xorsat_scaling::theory::{scaling_constant, TheoryConstants};
use xorsat_scaling::{validate, Error};

#[derive(Parser)]
#[command(
    name = "xorsat",
    version,
    about = "Finite-size scaling of random k-XORSAT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the threshold and scaling constants for arity k.
    Theory(TheoryArgs),
    /// Generate a random instance in the text format.
    Gen(GenArgs),
    /// Decide satisfiability of an instance (exit 0 SAT, 1 UNSAT).
    Solve(SolveArgs),
    /// Peel an instance to its 2-core and print the (z1, z2) trace.
    Peel(PeelArgs),
    /// Average peeling trajectories and compare with the mean curve.
    Traj(TrajArgs),
    /// Estimate the satisfiability probability over an (n, r) grid.
    Scan(ScanArgs),
    /// Moments of the scaled core surplus.
    Surplus(SurplusArgs),
    /// Compare the exact peeling chain with the approximate kernel chain.
    Kernels(KernelArgs),
    /// Run the built-in invariant checks.
    Validate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SatModeArg {
    Exact,
    Surplus,
}

impl From<SatModeArg> for SatMode {
    fn from(m: SatModeArg) -> Self {
        match m {
            SatModeArg::Exact => SatMode::ExactGf2OnCore,
            SatModeArg::Surplus => SatMode::SurplusSign,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Uniform over equations containing a degree-1 variable.
    Equation,
    /// Uniform over degree-1 variables.
    Variable,
}

impl From<RuleArg> for PeelRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Equation => PeelRule::UniformEquation,
            RuleArg::Variable => PeelRule::UniformDegreeOneVariable,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Shorthand for `--format json`.
    #[arg(long, conflicts_with = "format")]
    json: bool,
    /// Without a format the constants are printed as aligned text.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("size").required(true).args(["m", "r"]))]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of equations.
    #[arg(long)]
    n: usize,
    /// Number of variables.
    #[arg(long)]
    m: Option<usize>,
    /// Scaling parameter: m = floor(n rho_k + r sqrt(n)).
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file; `-` or absent reads standard input.
    input: Option<PathBuf>,
    /// Also print a satisfying assignment.
    #[arg(long)]
    witness: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct PeelArgs {
    /// Instance file; `-` or absent reads standard input.
    input: Option<PathBuf>,
    /// Seed of the random removal order.
    #[arg(long)]
    seed: u64,
    /// Record every stride-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value = "equation")]
    peel_rule: RuleArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TrajArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// Variables-to-equations ratio; defaults to rho_k.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value = "variable")]
    peel_rule: RuleArg,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Comma-separated equation counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Comma-separated scaling parameters.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    r: Vec<f64>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    sat_mode: SatModeArg,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SurplusArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    r: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// Variables-to-equations ratio; defaults to rho_k.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Removal order of the exact chain.
    #[arg(long, value_enum, default_value = "variable")]
    peel_rule: RuleArg,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure modes of a subcommand, mapped to exit codes.
#[derive(Debug)]
enum CliError {
    Lib(Error),
    Io(String),
    /// A check or verdict that is reported on stdout already.
    Silent(u8),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theory(a) => theory(a),
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Peel(a) => peel(a),
        Command::Traj(a) => traj(a),
        Command::Scan(a) => scan(a),
        Command::Surplus(a) => surplus(a),
        Command::Kernels(a) => kernels(a),
        Command::Validate => run_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Silent(code)) => ExitCode::from(code),
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Rounds every non-integer number to nine significant digits.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n
            .as_f64()
            .and_then(|x| fmt_g9(x).parse::<f64>().ok())
            .and_then(serde_json::Number::from_f64)
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
    let mut s =
        serde_json::to_string_pretty(&round_floats(v)).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn read_instance(input: Option<&PathBuf>) -> Result<Instance, CliError> {
    let text = match input {
        Some(p) if p.as_os_str() != "-" => fs::read_to_string(p)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?,
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    Ok(Instance::decode(&text)?)
}

fn theory_text(c: &TheoryConstants) -> String {
    let pair = |v: [f64; 2]| format!("{}, {}", fmt_g9(v[0]), fmt_g9(v[1]));
    let q = c.q_crit;
    let rows = [
        ("k", c.k.to_string()),
        ("lambda_k", fmt_g9(c.lambda_k)),
        ("rho_k", fmt_g9(c.rho_k)),
        ("theta_k", fmt_g9(c.theta_k)),
        ("rho_core", fmt_g9(c.rho_core)),
        ("y_crit", pair(c.y_crit)),
        ("dy_dtheta", pair(c.dy_dtheta)),
        ("dy_drho", pair(c.dy_drho)),
        (
            "Q_crit",
            format!("{}, {}, {}", fmt_g9(q.q11), fmt_g9(q.q12), fmt_g9(q.q22)),
        ),
        ("mu", fmt_g9(c.mu)),
        ("sigma", fmt_g9(c.sigma)),
        ("s_k", fmt_g9(c.s_k)),
    ];
    rows.iter().map(|(k, v)| format!("{k:<10} {v}\n")).collect()
}

fn theory(a: TheoryArgs) -> CliResult {
    let c = scaling_constant(a.k)?;
    let format = if a.json { Some(Format::Json) } else { a.format };
    let text = match format {
        None => theory_text(&c),
        Some(Format::Json) => json(&c)?,
        Some(Format::Csv) => {
            let v = serde_json::to_value(c).map_err(|e| CliError::Io(e.to_string()))?;
            let obj = v.as_object().expect("constants serialize to an object");
            let fields: Vec<String> = obj.keys().cloned().collect();
            let values: Vec<String> = obj
                .values()
                .map(|v| match v {
                    Value::Array(a) => a
                        .iter()
                        .map(|x| fmt_g9(x.as_f64().unwrap_or(f64::NAN)))
                        .collect::<Vec<_>>()
                        .join(";"),
                    Value::Number(n) if n.is_u64() => n.to_string(),
                    other => fmt_g9(other.as_f64().unwrap_or(f64::NAN)),
                })
                .collect();
            format!("{}\n{}\n", fields.join(","), values.join(","))
        }
    };
    emit(a.out.as_ref(), &text)
}

fn gen(a: GenArgs) -> CliResult {
    let m = match (a.m, a.r) {
        (Some(m), None) => m,
        (None, Some(r)) => m_from_r(a.k, a.n, r, scaling_constant(a.k)?.rho_k)?,
        _ => unreachable!("clap enforces exactly one of --m and --r"),
    };
    let inst = Instance::generate(a.k, m, a.n, a.seed)?;
    emit(a.out.as_ref(), &inst.encode())
}

fn solve(a: SolveArgs) -> CliResult {
    let inst = read_instance(a.input.as_ref())?;
    let res = SparseSystem::from_instance(&inst, None).solve(a.witness);
    let text = if a.format == Some(Format::Json) {
        json(&res)?
    } else {
        let mut s = format!(
            "{}\nrank_a {}\nrank_ab {}\n",
            if res.satisfiable { "SAT" } else { "UNSAT" },
            res.rank_a,
            res.rank_ab
        );
        if let Some(w) = &res.witness {
            let bits: Vec<&str> = w.iter().map(|&b| if b { "1" } else { "0" }).collect();
            s.push_str(&bits.join(" "));
            s.push('\n');
        }
        s
    };
    emit(None, &text)?;
    if res.satisfiable {
        Ok(())
    } else {
        Err(CliError::Silent(1))
    }
}

#[derive(Serialize)]
struct PeelOutput<'a> {
    trace: &'a xorsat_scaling::peel::PeelTrace,
    core: &'a xorsat_scaling::peel::CoreResult,
}

fn peel(a: PeelArgs) -> CliResult {
    let inst = read_instance(a.input.as_ref())?;
    let (trace, core) = peel_run_with(&inst, a.seed, a.stride, a.peel_rule.into());
    let text = match a.output.format {
        Format::Csv => {
            eprintln!(
                "tau_c {} n_core {} m_core {} surplus {}",
                trace.tau_c, core.n_core, core.m_core, core.surplus
            );
            to_csv(&trace.steps)
        }
        Format::Json => json(&PeelOutput {
            trace: &trace,
            core: &core,
        })?,
    };
    emit(a.output.out.as_ref(), &text)
}

fn traj(a: TrajArgs) -> CliResult {
    let rho = match a.rho {
        Some(r) => r,
        None => scaling_constant(a.k)?.rho_k,
    };
    let cfg = TrajConfig {
        epsilon: a.epsilon,
        stride: a.stride,
        rule: a.peel_rule.into(),
        threads: a.threads,
        ..TrajConfig::new(a.k, a.n, rho, a.trials, a.seed)
    };
    let report = run_trajectory(&cfg)?;
    let text = match a.output.format {
        Format::Csv => {
            eprintln!(
                "max_dev {} normalized_dev {}",
                fmt_g9(report.max_dev),
                fmt_g9(report.normalized_dev)
            );
            traj_csv(&report.points)
        }
        Format::Json => json(&report)?,
    };
    emit(a.output.out.as_ref(), &text)
}

fn scan(a: ScanArgs) -> CliResult {
    let cfg = ScanConfig {
        k: a.k,
        n_values: a.n,
        r_values: a.r,
        trials: a.trials,
        master_seed: a.seed,
        sat_mode: a.sat_mode.into(),
        threads: a.threads,
    };
    let rows = run_scan(&cfg)?;
    let text = match a.output.format {
        Format::Csv => scan_csv(&rows),
        Format::Json => json(&rows)?,
    };
    emit(a.output.out.as_ref(), &text)
}

/// One-row CSV of a flat report.
fn report_csv<T: Serialize>(report: &T) -> Result<String, CliError> {
    let v = round_floats(serde_json::to_value(report).map_err(|e| CliError::Io(e.to_string()))?);
    let obj = v.as_object().expect("reports serialize to objects");
    let values: Vec<String> = obj
        .values()
        .map(|v| match v {
            Value::Number(n) => n.as_f64().map_or_else(
                || n.to_string(),
                |x| {
                    if n.is_i64() || n.is_u64() {
                        n.to_string()
                    } else {
                        fmt_g9(x)
                    }
                },
            ),
            other => other.to_string(),
        })
        .collect();
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    Ok(format!("{}\n{}\n", keys.join(","), values.join(",")))
}

fn surplus(a: SurplusArgs) -> CliResult {
    let report = surplus_stats(a.k, a.n, a.r, a.trials, a.seed, a.threads)?;
    let text = match a.output.format {
        Format::Csv => report_csv(&report)?,
        Format::Json => json(&report)?,
    };
    emit(a.output.out.as_ref(), &text)
}

struct KernelRow<'a>(&'a xorsat_scaling::experiments::KernelGridPoint);

impl Csv for KernelRow<'_> {
    const HEADER: &'static str = "theta,tau,exact_x1_mean,exact_x2_mean,exact_x1_sd,exact_x2_sd,\
approx_x1_mean,approx_x2_mean,approx_x1_sd,approx_x2_sd,approx_count,y1_theory,y2_theory,mean_diff";

    fn csv_fields(&self) -> Vec<String> {
        let p = self.0;
        let mut f = vec![fmt_g9(p.theta), p.tau.to_string()];
        for v in [p.exact_mean, p.exact_sd, p.approx_mean, p.approx_sd] {
            f.extend(v.iter().map(|&x| fmt_g9(x)));
        }
        f.push(p.approx_count.to_string());
        f.extend(p.theory.iter().map(|&x| fmt_g9(x)));
        f.push(fmt_g9(p.mean_diff));
        f
    }
}

fn kernels(a: KernelArgs) -> CliResult {
    let rho = match a.rho {
        Some(r) => r,
        None => scaling_constant(a.k)?.rho_k,
    };
    let report = compare_kernels(
        a.k,
        a.n,
        rho,
        a.trials,
        a.seed,
        a.peel_rule.into(),
        a.threads,
    )?;
    let text = match a.output.format {
        Format::Csv => {
            eprintln!(
                "sup_mean_diff {} truncations {}",
                fmt_g9(report.sup_mean_diff),
                report.truncations
            );
            let rows: Vec<KernelRow> = report.points.iter().map(KernelRow).collect();
            to_csv(&rows)
        }
        Format::Json => json(&report)?,
    };
    emit(a.output.out.as_ref(), &text)
}

fn run_validate() -> CliResult {
    let checks = validate::run_all();
    let mut text = String::new();
    for c in &checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        text.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    text.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
    emit(None, &text)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Silent(2))
    }
}
