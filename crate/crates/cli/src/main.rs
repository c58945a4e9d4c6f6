use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use gbv::checks::{run_all, CheckConfig};
use gbv::sampling::weakstar_counterexample;
use gbv::solver::{self, check_wellposedness, enumerate_extreme_points, ExtremeOptions, Solution};
use gbv::{
    FundamentalSystem, GbvError, PiecewiseLinearTestFunction, PolySpline, Problem, Side,
    SolveOptions, TraceEval,
};
use rayon::prelude::*;

mod table;

/// Sampling and sparse reconstruction of functions of generalized bounded variation.
#[derive(Parser)]
#[command(name = "gbv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the solution document.
    Solve {
        problem: PathBuf,
        /// Solve on a uniform knot grid of this pitch by coordinate descent instead.
        #[arg(long)]
        oracle_step: Option<f64>,
        /// Grid pitch used for mixed-order problems.
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Recorded in the solution report.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solution JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace table of the solution.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Comma-separated regularization weights; writes an array of solutions.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambda_grid: Option<Vec<f64>>,
    },
    /// Evaluate traces of a spline document.
    Eval {
        spline: PathBuf,
        /// Query `t:side:d`, e.g. `0:plus:0`; `d` defaults to 0.
        #[arg(long = "at", required = true, allow_hyphen_values = true)]
        at: Vec<String>,
    },
    /// Run the randomized invariant suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, hide = true)]
        inject_side_flip: bool,
    },
    /// Tabulate the weak* counterexample `u - u(. - 1/n)` against the unit hat.
    DemoWeakstar {
        #[arg(long, default_value_t = 10)]
        n_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate the extreme points of the solution set.
    ExtremePoints {
        problem: PathBuf,
        #[arg(long)]
        max_support: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

impl From<GbvError> for Failure {
    fn from(e: GbvError) -> Self {
        let code = match e {
            GbvError::Infeasible
            | GbvError::IllPosed(_)
            | GbvError::NoConvergence(_)
            | GbvError::MixedOrder
            | GbvError::GridTooLarge(_)
            | GbvError::ScaleGuard(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::input(error)
    }
}

type Outcome = Result<u8, Failure>;

fn color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal()
}

fn diagnostic(level: &str, msg: impl std::fmt::Display) {
    if color() {
        let code = if level == "error" { "31" } else { "33" };
        eprintln!("\x1b[1;{code}m{level}\x1b[0m: {msg}");
    } else {
        eprintln!("{level}: {msg}");
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn solve_one(p: &Problem, opts: &SolveOptions, oracle_step: Option<f64>) -> gbv::Result<Solution> {
    match oracle_step {
        Some(step) => {
            let mut s = solver::oracle_solve(p, step)?;
            s.report.seed = opts.seed;
            Ok(s)
        }
        None => solver::solve(p, opts),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    oracle_step: Option<f64>,
    grid_step: Option<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
    out: Option<&Path>,
    csv: Option<&Path>,
    lambda_grid: Option<&[f64]>,
) -> Outcome {
    let problem: Problem = read_json(path)?;
    let opts = SolveOptions {
        tol,
        max_iter,
        seed,
        grid_step,
        ..SolveOptions::default()
    };

    let Some(lambdas) = lambda_grid else {
        let report = check_wellposedness(&problem);
        for w in &report.warnings {
            diagnostic("warning", w);
        }
        if !report.passed() {
            let status = serde_json::to_value(report.status).expect("status serializes");
            let status = status.as_str().unwrap_or_default().to_owned();
            for e in &report.errors {
                diagnostic("error", e);
            }
            diagnostic("error", format!("problem is {status}"));
            return Ok(2);
        }
        let solution = solve_one(&problem, &opts, oracle_step)?;
        if !solution.report.converged {
            diagnostic("warning", "solver stopped at the iteration limit");
        }
        write_output(out, &to_json(&solution))?;
        if let Some(csv) = csv {
            table::write_trace_table(csv, &problem, &solution.spline)?;
        }
        return Ok(0);
    };

    if csv.is_some() {
        return Err(Failure::input(anyhow!(
            "--csv cannot be combined with --lambda-grid"
        )));
    }
    let problems = lambdas
        .iter()
        .map(|&l| problem.with_lambda(l))
        .collect::<gbv::Result<Vec<_>>>()?;
    let solutions = problems
        .par_iter()
        .map(|p| solve_one(p, &opts, oracle_step))
        .collect::<gbv::Result<Vec<_>>>()?;
    write_output(out, &to_json(&solutions))?;
    Ok(0)
}

fn parse_query(q: &str) -> anyhow::Result<(f64, Side, usize)> {
    let parts: Vec<&str> = q.split(':').collect();
    let (t, side, d) = match parts.as_slice() {
        [t, side] => (*t, *side, "0"),
        [t, side, d] => (*t, *side, *d),
        _ => return Err(anyhow!("query `{q}` is not of the form t:side:d")),
    };
    let t: f64 = t
        .parse()
        .map_err(|_| anyhow!("query `{q}`: bad abscissa `{t}`"))?;
    if !t.is_finite() {
        return Err(anyhow!("query `{q}`: abscissa must be finite"));
    }
    let side: Side = side
        .parse()
        .map_err(|_| anyhow!("query `{q}`: side must be plus or minus"))?;
    let d = d
        .parse()
        .map_err(|_| anyhow!("query `{q}`: bad derivative order `{d}`"))?;
    Ok((t, side, d))
}

fn cmd_eval(path: &Path, queries: &[String]) -> Outcome {
    let f: PolySpline = read_json(path)?;
    let queries = queries
        .iter()
        .map(|q| parse_query(q))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut lines = String::new();
    for (t, side, d) in queries {
        let v = f.generalized_trace(t, side, d)?;
        lines.push_str(&format!("{t} {side} {d} {}\n", table::num(v)));
    }
    write_output(None, &lines)?;
    Ok(0)
}

fn cmd_check(seed: u64, cases: usize, flip: bool) -> Outcome {
    let cfg = CheckConfig {
        flip_sides: flip,
        ..CheckConfig::new(seed, cases)
    };
    if cases == 0 {
        diagnostic(
            "warning",
            "--cases 0: no cases drawn, the suite passes vacuously",
        );
    }
    let outcomes = run_all(&cfg);
    let mut out = String::new();
    let mut failed = 0;
    for o in &outcomes {
        let mark = if o.passed() { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{mark}  {:<9} {:<48} {:>6}\n",
            o.module, o.name, o.cases
        ));
        if let Some(case) = &o.failure {
            failed += 1;
            out.push_str(&format!("      smallest failing case: {case}\n"));
        }
    }
    out.push_str(&format!(
        "{} checks, {} failed (seed {seed}, {cases} cases)\n",
        outcomes.len(),
        failed
    ));
    write_output(None, &out)?;
    if failed > 0 {
        diagnostic("error", format!("{failed} invariant checks failed"));
        return Ok(3);
    }
    Ok(0)
}

fn cmd_demo_weakstar(n_max: u64, out: Option<&Path>) -> Outcome {
    if n_max == 0 {
        return Err(Failure::input(anyhow!("--n-max must be at least 1")));
    }
    let g = PiecewiseLinearTestFunction::unit_hat();
    let sys = FundamentalSystem::new(1, -1.0, f64::INFINITY)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "pairing_hat", "trace_plus_at_0", "jet0"])
        .context("csv")?;
    for n in 1..=n_max {
        let s = weakstar_counterexample(n, &g, &sys)?;
        w.write_record([
            n.to_string(),
            table::num(s.pairing),
            table::num(s.trace),
            table::num(s.jet[0]),
        ])
        .context("csv")?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    write_output(out, &String::from_utf8(bytes).expect("ascii"))?;
    Ok(0)
}

fn cmd_extreme(path: &Path, max_support: Option<usize>, out: Option<&Path>) -> Outcome {
    let problem: Problem = read_json(path)?;
    let opts = ExtremeOptions {
        max_support,
        ..ExtremeOptions::default()
    };
    let points = enumerate_extreme_points(&problem, &opts)?;
    write_output(out, &to_json(&points))?;
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve {
            problem,
            oracle_step,
            grid_step,
            tol,
            max_iter,
            seed,
            out,
            csv,
            lambda_grid,
        } => cmd_solve(
            &problem,
            oracle_step,
            grid_step,
            tol,
            max_iter,
            seed,
            out.as_deref(),
            csv.as_deref(),
            lambda_grid.as_deref(),
        ),
        Command::Eval { spline, at } => cmd_eval(&spline, &at),
        Command::Check {
            seed,
            cases,
            inject_side_flip,
        } => cmd_check(seed, cases, inject_side_flip),
        Command::DemoWeakstar { n_max, out } => cmd_demo_weakstar(n_max, out.as_deref()),
        Command::ExtremePoints {
            problem,
            max_support,
            out,
        } => cmd_extreme(&problem, max_support, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    // Exit statuses are limited to 0..=3, so panics are reported as input errors.
    std::panic::set_hook(Box::new(|info| {
        diagnostic("error", format!("internal failure: {info}"))
    }));
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(f)) => {
            diagnostic("error", format!("{:#}", f.error));
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(1),
    }
}
