//! Command-line front end: `fit`, `bounds`, `simulate` and `rates`.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 a fit did not reach
//! its tolerance, 3 a simulation check failed.

mod input;
pub mod json;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tvlogit::model::excess_risk;
use tvlogit::sim::{
    run_boundedness_experiment, run_oracle_experiment, run_rate_experiment, LambdaRule, Scenario,
    TruthKind,
};
use tvlogit::solver::{fit, FitConfig};
use tvlogit::theory::{compute_bounds, extract_jumps, lambda_min, theorem2_window, Theorem2Window};
use tvlogit::tvprox::tv;
use tvlogit::{Error, JumpStructure, TheoryBounds, TheoryParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tvlogit", version, about = "Total-variation penalized logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the estimator to a CSV file with a `y` column.
    Fit(FitArgs),
    /// Evaluate the bound quantities for a jump structure.
    Bounds(BoundsArgs),
    /// Run a seeded replicate experiment.
    Simulate(SimulateArgs),
    /// Mean excess risk over a grid of sample sizes.
    Rates(RatesArgs),
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// CSV with header; column `y` in {0,1}, optional column `f0`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Sup-norm constraint |f_i| <= B.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    box_bound: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Differences above this count as jumps of the fit.
    #[arg(long, default_value_t = 1e-6)]
    jump_tol: f64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LambdaRuleArg {
    Min,
}

#[derive(Debug, Args, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    /// Comma-separated 1-based jump positions, each in 2..=n.
    #[arg(long, default_value = "")]
    jumps: String,
    /// Comma-separated jump signs (`+`/`-`), one per jump.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    signs: String,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    a0: f64,
    /// Sup-norm bound B entering the curvature constant.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, conflicts_with = "lambda_rule")]
    lambda: Option<f64>,
    /// Rule for lambda when none is given; `min` is the default.
    #[arg(long, value_enum)]
    lambda_rule: Option<LambdaRuleArg>,
    /// Also evaluate the tuning window of the sup-norm boundedness result.
    #[arg(long)]
    theorem2: bool,
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    #[arg(long, default_value_t = 0.0)]
    f0_inf: f64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Constant,
    Monotone,
    Alternating,
    Custom,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum ExperimentArg {
    Oracle,
    Boundedness,
}

#[derive(Debug, Args, Serialize)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    scenario: KindArg,
    #[arg(long, default_value_t = 0)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    base: f64,
    /// Comma-separated levels for `--scenario custom`.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    /// Sup-norm bound B.
    #[arg(long, default_value_t = 1.5)]
    b: f64,
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    a0: f64,
    /// lambda = M * lambda_min (default M = 1).
    #[arg(long, conflicts_with = "lambda")]
    lambda_mult: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Accept lambda below lambda_min.
    #[arg(long)]
    allow_small_lambda: bool,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct RunArgs {
    /// Worker threads; the output does not depend on this.
    #[arg(long)]
    #[serde(skip)]
    workers: Option<usize>,
    /// Include per-replicate records in the JSON report.
    #[arg(long)]
    full: bool,
    /// Also write per-replicate records as CSV.
    #[arg(long)]
    #[serde(skip)]
    csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = ExperimentArg::Oracle)]
    experiment: ExperimentArg,
    /// Budget M0 for the boundedness experiment; defaults to max(TV(f0), 1).
    #[arg(long)]
    m0: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args, Serialize)]
struct RatesArgs {
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long)]
    n_grid: String,
    #[command(flatten)]
    #[serde(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

/// Failure carrying the exit code and a message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn input_error(message: impl Display) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.to_string(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        input_error(e)
    }
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

const TOOL: Tool = Tool {
    name: "tvlogit",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    tool: Tool,
    command: &'static str,
    config: &'a C,
    #[serde(flatten)]
    result: R,
}

fn emit<C: Serialize, R: Serialize>(
    command: &'static str,
    config: &C,
    result: R,
    output: Option<&PathBuf>,
) -> Result<(), Failure> {
    let report = Report {
        tool: TOOL,
        command,
        config,
        result,
    };
    let text = json::to_string(&report).map_err(|e| input_error(format!("cannot serialize report: {e}")))?;
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Rates(a) => cmd_rates(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[derive(Serialize)]
struct FitOut<'a> {
    n: usize,
    lambda: f64,
    #[serde(rename = "box")]
    box_bound: Option<f64>,
    f_hat: &'a [f64],
    objective: f64,
    kkt_residual: f64,
    iterations: usize,
    converged: bool,
    tv_of_fit: f64,
    jumps_of_fit: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    excess_risk: Option<f64>,
}

fn cmd_fit(a: &FitArgs) -> Result<i32, Failure> {
    let data = input::read_dataset(&a.input)?;
    let mut config = FitConfig::new(a.lambda);
    config.box_bound = a.box_bound;
    config.tol = a.tol;
    config.max_iter = a.max_iter;
    if !(a.jump_tol >= 0.0) {
        return Err(input_error("jump tolerance must be >= 0"));
    }
    let result = fit(&data, &config)?;
    let jumps = extract_jumps(&result.f_hat, a.jump_tol);
    let excess = match data.truth() {
        Some(truth) => Some(excess_risk(&result.f_hat, truth)?),
        None => None,
    };
    let out = FitOut {
        n: data.len(),
        lambda: a.lambda,
        box_bound: a.box_bound,
        f_hat: result.f_hat.as_slice(),
        objective: result.objective,
        kkt_residual: result.kkt_residual,
        iterations: result.iterations,
        converged: result.converged,
        tv_of_fit: tv(&result.f_hat),
        jumps_of_fit: jumps.jumps(),
        excess_risk: excess,
    };
    emit("fit", a, out, a.output.as_ref())?;
    if result.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "error: no convergence after {} iterations (KKT residual {:e})",
            result.iterations, result.kkt_residual
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure>
where
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| input_error(format!("bad {what} entry {s:?}: {e}"))))
        .collect()
}

fn parse_signs(text: &str) -> Result<Vec<i8>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "+" | "+1" | "1" => Ok(1),
            "-" | "-1" => Ok(-1),
            _ => Err(input_error(format!("bad sign {s:?}; use + or -"))),
        })
        .collect()
}

#[derive(Serialize)]
struct Theorem2Out {
    window: &'static str,
    #[serde(flatten)]
    details: Theorem2Window,
}

#[derive(Serialize)]
struct StructureOut<'a> {
    jumps: &'a [usize],
    signs: &'a [i8],
    segment_lengths: &'a [usize],
    j_monotone: &'a [usize],
    j_change: &'a [usize],
}

impl<'a> From<&'a JumpStructure> for StructureOut<'a> {
    fn from(js: &'a JumpStructure) -> Self {
        StructureOut {
            jumps: js.jumps(),
            signs: js.signs(),
            segment_lengths: js.segment_lengths(),
            j_monotone: js.j_monotone(),
            j_change: js.j_change(),
        }
    }
}

#[derive(Serialize)]
struct BoundsOut<'a> {
    structure: StructureOut<'a>,
    #[serde(flatten)]
    bounds: TheoryBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem2: Option<Theorem2Out>,
}

fn cmd_bounds(a: &BoundsArgs) -> Result<i32, Failure> {
    let jumps: Vec<usize> = parse_list(&a.jumps, "jump")?;
    let signs = parse_signs(&a.signs)?;
    let js = JumpStructure::new(a.n, jumps, signs)?;
    let mut p = TheoryParams {
        t: a.t,
        nu: a.nu,
        a0: a.a0,
        b: a.b,
        lambda: f64::NAN,
    };
    p.lambda = match a.lambda {
        Some(l) => l,
        None => lambda_min(&js, &p),
    };
    let bounds = compute_bounds(&js, &p)?;
    if bounds.lambda_below_min {
        eprintln!(
            "warning: lambda {} is below lambda_min {}; the oracle bound does not apply",
            bounds.lambda, bounds.lambda_min
        );
    }
    let theorem2 = if a.theorem2 {
        let details = theorem2_window(a.m0, a.f0_inf, a.n, a.t, a.a0, Some(p.lambda))?;
        Some(Theorem2Out {
            window: if details.feasible { "feasible" } else { "infeasible" },
            details,
        })
    } else {
        None
    };
    let out = BoundsOut {
        structure: (&js).into(),
        bounds,
        theorem2,
    };
    emit("bounds", a, out, a.output.as_ref())?;
    Ok(EXIT_OK)
}

fn build_scenario(a: &ScenarioArgs, n: usize) -> Result<Scenario, Failure> {
    let kind = match a.scenario {
        KindArg::Constant => TruthKind::Constant,
        KindArg::Monotone => TruthKind::MonotoneStaircase,
        KindArg::Alternating => TruthKind::Alternating,
        KindArg::Custom => {
            let text = a
                .levels
                .as_deref()
                .ok_or_else(|| input_error("--scenario custom needs --levels"))?;
            TruthKind::Custom(parse_list(text, "level")?)
        }
    };
    if a.levels.is_some() && a.scenario != KindArg::Custom {
        return Err(input_error("--levels only applies to --scenario custom"));
    }
    if a.reps == 0 {
        return Err(input_error("--reps must be positive"));
    }
    let lambda_rule = match (a.lambda, a.lambda_mult) {
        (Some(l), _) => LambdaRule::Explicit(l),
        (None, m) => LambdaRule::MinMultiple(m.unwrap_or(1.0)),
    };
    Ok(Scenario {
        n,
        kind,
        s: a.s,
        magnitude: a.magnitude,
        base: a.base,
        b: a.b,
        t: a.t,
        nu: a.nu,
        a0: a.a0,
        lambda_rule,
        allow_small_lambda: a.allow_small_lambda,
    })
}

fn workers(r: &RunArgs) -> usize {
    r.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn write_csv<T: Serialize>(path: &PathBuf, records: &[T]) -> Result<(), Failure> {
    let fail = |e: csv::Error| input_error(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in records {
        w.serialize(r).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32, Failure> {
    let scenario = build_scenario(&a.scenario, a.n)?;
    let (reps, seed, k) = (a.scenario.reps, a.scenario.seed, workers(&a.run));
    match a.experiment {
        ExperimentArg::Oracle => {
            if a.m0.is_some() {
                return Err(input_error("--m0 only applies to --experiment boundedness"));
            }
            let mut report = run_oracle_experiment(&scenario, reps, seed, k)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = &a.run.csv {
                write_csv(path, &report.records)?;
            }
            if !a.run.full {
                report.records.clear();
            }
            emit("simulate", a, &report, a.run.output.as_ref())?;
            if report.excluded > 0 {
                Ok(EXIT_NOT_CONVERGED)
            } else if !report.passed {
                eprintln!(
                    "error: violation fraction {} exceeds exp(-t) = {}",
                    report.violation_fraction, report.tolerated_fraction
                );
                Ok(EXIT_CHECK_FAILED)
            } else {
                Ok(EXIT_OK)
            }
        }
        ExperimentArg::Boundedness => {
            let m0 = match a.m0 {
                Some(m) => m,
                None => {
                    let (truth, _) = tvlogit::sim::generate_scenario(&scenario)?;
                    tv(&truth).max(1.0)
                }
            };
            let mut report = run_boundedness_experiment(&scenario, m0, reps, seed, k)?;
            if let Some(path) = &a.run.csv {
                write_csv(path, &report.records)?;
            }
            if !a.run.full {
                report.records.clear();
            }
            emit("simulate", a, &report, a.run.output.as_ref())?;
            Ok(if report.excluded > 0 { EXIT_NOT_CONVERGED } else { EXIT_OK })
        }
    }
}

fn cmd_rates(a: &RatesArgs) -> Result<i32, Failure> {
    let grid: Vec<usize> = parse_list(&a.n_grid, "n")?;
    let scenario = build_scenario(&a.scenario, grid.first().copied().unwrap_or(0))?;
    let report = run_rate_experiment(&scenario, &grid, a.scenario.reps, a.scenario.seed, workers(&a.run))?;
    if let Some(path) = &a.run.csv {
        write_csv(path, &report.points)?;
    }
    emit("rates", a, &report, a.run.output.as_ref())?;
    let excluded: usize = report.points.iter().map(|p| p.excluded).sum();
    Ok(if excluded > 0 { EXIT_NOT_CONVERGED } else { EXIT_OK })
}
