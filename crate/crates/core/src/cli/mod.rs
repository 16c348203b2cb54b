//! The `cbf` command-line front end.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bernstein::{classify_triplet, ClassifyOptions, LimitReport, TripletClassification};
use crate::error::{CbfError, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernels::{make_pair, KernelPair, LocalExponents, PairOptions, Provenance};
use crate::ops::{verify_sonine, Operators};
use crate::sim::{self, Estimate, SimMode};
use crate::solver::{Diagnostics, Solver};

use config::{Command, Identity, RunConfig, SourceSpec};
use report::Num;

pub const DEFAULT_OUT: &str = "out";
/// Kernel pairs whose Sonine deviation exceeds this carry a warning.
const SONINE_WARNING: f64 = 1e-3;
const DEFAULT_TABLE_POINTS: usize = 101;
const PASS_SIGMAS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "cbf", version, about = "Censored Bernstein fractional calculus: kernels, series solvers, Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the simulator.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Kernel table, contraction constant and Sonine check.
    Kernels,
    /// Row of the triplet table and the conjugate's killing and drift.
    Classify,
    /// Series solution of the censored initial value or resolvent problem.
    Solve,
    /// Censored-subordinator paths or undershoot chains.
    Simulate,
    /// Series values against Monte Carlo estimates.
    Compare,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Kernels => Command::Kernels,
            Sub::Classify => Command::Classify,
            Sub::Solve => Command::Solve,
            Sub::Simulate => Command::Simulate,
            Sub::Compare => Command::Compare,
        }
    }
}

/// Files written by a command, report first.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: PathBuf,
    pub data: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Cbf(CbfError),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Cbf(e) => e.exit_code(),
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Cbf(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<CbfError> for CliError {
    fn from(e: CbfError) -> Self {
        CliError::Cbf(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.report.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> std::result::Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CbfError::Validation("--config <file> is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        if let Some(sim) = config.sim.as_mut() {
            sim.seed = seed;
        }
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    let out = config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let command = Command::from(cli.command);
    match cli.threads {
        Some(0) => Err(CbfError::Validation("--threads must be positive".into()).into()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CbfError::Validation(format!("thread pool: {e}")))?;
            pool.install(|| execute(command, &config, &out))
        }
        None => execute(command, &config, &out),
    }
}

/// Runs one command on a parsed configuration, writing into `out`.
pub fn execute(command: Command, config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    config.validate(command)?;
    match command {
        Command::Kernels => cmd_kernels(config, out),
        Command::Classify => cmd_classify(config, out),
        Command::Solve => cmd_solve(config, out),
        Command::Simulate => cmd_simulate(config, out),
        Command::Compare => cmd_compare(config, out),
    }
}

fn build_pair(config: &RunConfig) -> Result<KernelPair> {
    let pair = make_pair(&config.spec, &PairOptions::default())?;
    match config.kernels.as_ref().and_then(|k| k.mismatched_density.as_ref()) {
        Some(other) => KernelPair::mismatched(&pair, &make_pair(other, &PairOptions::default())?),
        None => Ok(pair),
    }
}

fn source(grid: Grid, g: &SourceSpec) -> Result<GridFunction> {
    GridFunction::from_fn(grid, |s| g.eval(s))
}

fn finish<T: Serialize>(
    command: Command,
    config: &RunConfig,
    out: &Path,
    result: T,
    data: Vec<PathBuf>,
    warnings: Vec<String>,
) -> std::result::Result<Outcome, CliError> {
    let text = report::render(command, config, result)?;
    let report = report::write(out, &format!("{}.json", command.name()), &text)?;
    Ok(Outcome { report, data, warnings })
}

#[derive(Serialize)]
struct KernelsResult {
    provenance: Provenance,
    q: Num,
    sonine_deviation: Num,
    exponents: LocalExponents,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

fn cmd_kernels(config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    let command = Command::Kernels;
    let grid = config.grid(command)?;
    let pair = build_pair(config)?;
    let deviation = verify_sonine(&pair, grid.t_end, grid.n)?;
    let warning = if matches!(pair.provenance(), Provenance::Mismatched) || deviation > SONINE_WARNING {
        Some(format!("kernels are not a Sonine pair (deviation {deviation:e})"))
    } else {
        None
    };
    let points = config
        .kernels
        .as_ref()
        .and_then(|k| k.table_points)
        .unwrap_or(DEFAULT_TABLE_POINTS);
    let xs: Vec<f64> = (1..=points).map(|i| grid.t_end * i as f64 / points as f64).collect();
    let table = report::write(out, "kernels.csv", &pair.table_csv(&xs))?;
    let result = KernelsResult {
        provenance: pair.provenance(),
        q: Num(pair.q()),
        sonine_deviation: Num(deviation),
        exponents: pair.exponents(),
        warning: warning.clone(),
    };
    finish(command, config, out, result, vec![table], warning.into_iter().collect())
}

#[derive(Serialize)]
struct Limits {
    inv_f_at_zero: Num,
    inv_f_at_infinity: Num,
    conj_at_zero: Num,
    conj_at_infinity: Num,
}

impl From<LimitReport> for Limits {
    fn from(l: LimitReport) -> Self {
        Limits {
            inv_f_at_zero: Num(l.inv_f_at_zero),
            inv_f_at_infinity: Num(l.inv_f_at_infinity),
            conj_at_zero: Num(l.conj_at_zero),
            conj_at_infinity: Num(l.conj_at_infinity),
        }
    }
}

#[derive(Serialize)]
struct ClassifyResult {
    killing: f64,
    drift: f64,
    classification: TripletClassification,
    #[serde(skip_serializing_if = "Option::is_none")]
    limits: Option<Limits>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limits_satisfied: Option<bool>,
}

fn cmd_classify(config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    let mut opts = ClassifyOptions::default();
    if let Some(c) = &config.classify {
        opts.m0_override = c.m0_override;
        opts.m1_override = c.m1_override;
    }
    let classification = classify_triplet(&config.spec, &opts)?;
    let (killing, drift) = config.spec.killing_drift();
    let limits = config.spec.limit_report().ok();
    let result = ClassifyResult {
        killing,
        drift,
        classification,
        limits: limits.map(Limits::from),
        limits_satisfied: limits.map(|l| l.satisfied()),
    };
    finish(Command::Classify, config, out, result, Vec::new(), Vec::new())
}

#[derive(Serialize)]
struct SolveResult {
    problem: &'static str,
    diagnostics: Diagnostics,
    phi_at_end: f64,
}

fn cmd_solve(config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    let command = Command::Solve;
    let grid = config.grid(command)?;
    let s = config.solver();
    let pair = build_pair(config)?;
    pair.require_contraction()?;
    let solver = Solver::with_reconstruction(&pair, grid, s.reconstruction)?;
    let g = source(grid, &s.g)?;
    let (problem, sol) = if s.lambda == 0.0 {
        ("initial_value", solver.solve_censored_ivp(&g, s.phi0, s.tol)?)
    } else {
        ("resolvent", solver.solve_resolvent_inhom(s.lambda, s.phi0, &g, s.tol)?)
    };
    let csv = report::write(out, "solution.csv", &sol.phi.to_csv("phi"))?;
    let result = SolveResult {
        problem,
        diagnostics: sol.diagnostics(),
        phi_at_end: *sol.phi.values().last().expect("grid has nodes"),
    };
    finish(command, config, out, result, vec![csv], Vec::new())
}

#[derive(Serialize)]
struct SimulateResult {
    target: &'static str,
    estimate: Estimate,
    terminated_fraction: f64,
    mean_cycles: f64,
}

fn chain_dump_csv(chains: &[sim::CensoringChain]) -> String {
    let mut out = String::from("path_id,step,level,expected_cycle_time\n");
    for (id, c) in chains.iter().enumerate() {
        for (j, (y, u)) in c.levels.iter().zip(&c.expected_cycle_times).enumerate() {
            out.push_str(&format!("{id},{j},{y:e},{u:e}\n"));
        }
    }
    out
}

fn cmd_simulate(config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    let command = Command::Simulate;
    let cfg = config.sim_config(command)?;
    let dump = config.sim(command)?.dump_paths;
    let (result, csv) = match cfg.mode {
        SimMode::PathDiscretized => {
            let paths = sim::simulate_paths(&cfg)?;
            let estimate = sim::lifetime_from_paths(&cfg, &paths)?;
            let cycles = paths.iter().map(|p| p.cycle_count as f64).sum::<f64>() / paths.len() as f64;
            let result = SimulateResult {
                target: "lifetime_mean",
                estimate,
                terminated_fraction: sim::terminated_fraction(&paths),
                mean_cycles: cycles,
            };
            let shown = &paths[..dump.min(paths.len())];
            (result, report::write(out, "paths.csv", &sim::path_dump_csv(shown))?)
        }
        SimMode::ExactChain => {
            let pair = build_pair(config)?;
            let chains = sim::sample_chains(&pair, cfg.x0, cfg.n_paths, cfg.seed, cfg.floor())?;
            let estimate = sim::chain_lifetime_estimate(&chains, cfg.seed);
            let n = chains.len() as f64;
            let result = SimulateResult {
                target: "lifetime_mean",
                estimate,
                terminated_fraction: chains.iter().filter(|c| c.terminated).count() as f64 / n,
                mean_cycles: chains.iter().map(|c| (c.levels.len() - 1) as f64).sum::<f64>() / n,
            };
            let shown = &chains[..dump.min(chains.len())];
            (result, report::write(out, "chains.csv", &chain_dump_csv(shown))?)
        }
    };
    finish(command, config, out, result, vec![csv], Vec::new())
}

#[derive(Serialize)]
struct Comparison {
    identity: Identity,
    analytic: f64,
    mc_estimate: f64,
    stderr: f64,
    bias_allowance: f64,
    n: usize,
    excluded: usize,
    z_score: Num,
    pass: bool,
}

#[derive(Serialize)]
struct CompareResult {
    comparisons: Vec<Comparison>,
    all_pass: bool,
}

fn cmd_compare(config: &RunConfig, out: &Path) -> std::result::Result<Outcome, CliError> {
    let command = Command::Compare;
    let grid = config.grid(command)?;
    let cfg = config.sim_config(command)?;
    let cmp = config.compare(command)?;
    let s = config.solver();
    let pair = build_pair(config)?;
    pair.require_contraction()?;
    let solver = Solver::with_reconstruction(&pair, grid, s.reconstruction)?;
    let g = source(grid, &s.g)?;
    let gf = |x: f64| s.g.eval(x);
    let x0 = cfg.x0;
    let need_discount = || {
        if s.lambda < 0.0 {
            Ok(s.lambda)
        } else {
            Err(CbfError::Validation("this identity needs solver.lambda < 0".into()))
        }
    };
    let mut comparisons = Vec::new();
    for &identity in &cmp.identities {
        let (analytic, est) = match identity {
            Identity::Potential => {
                let ops: &Operators = solver.operators();
                (ops.integral.apply(&g).eval(x0), sim::estimate_potential(&cfg, &gf)?)
            }
            Identity::CensoredPotential => {
                let analytic = solver.censored_integral(&g, s.tol)?.value.eval(x0);
                let est = match (cfg.mode, &s.g) {
                    (SimMode::ExactChain, SourceSpec::Constant { value }) => {
                        let mut e = sim::estimate_lifetime_mean(&pair, x0, cfg.n_paths, cfg.seed)?;
                        e.estimate *= value;
                        e.stderr *= value.abs();
                        e
                    }
                    (SimMode::ExactChain, _) => {
                        return Err(CbfError::Validation(
                            "the exact chain estimates the censored potential of constants only".into(),
                        )
                        .into())
                    }
                    _ => sim::estimate_censored_functional(&cfg, &gf, 0.0)?,
                };
                (analytic, est)
            }
            Identity::Resolvent => {
                let lambda = need_discount()?;
                let sol = solver.solve_resolvent_inhom(lambda, 0.0, &g, s.tol)?;
                (sol.phi.eval(x0), sim::estimate_censored_functional(&cfg, &gf, lambda)?)
            }
            Identity::LifetimeLaplace => {
                let lambda = need_discount()?;
                (
                    solver.lifetime_laplace(lambda, x0, s.tol)?,
                    sim::estimate_lifetime_laplace(&cfg, lambda)?,
                )
            }
        };
        let target = analytic + cmp.analytic_offset;
        let z = est.z_score(target);
        comparisons.push(Comparison {
            identity,
            analytic: target,
            mc_estimate: est.estimate,
            stderr: est.stderr,
            bias_allowance: est.bias_allowance,
            n: est.n,
            excluded: est.excluded,
            z_score: Num(z),
            pass: z <= PASS_SIGMAS,
        });
    }
    let all_pass = comparisons.iter().all(|c| c.pass);
    finish(command, config, out, CompareResult { comparisons, all_pass }, Vec::new(), Vec::new())
}
