//! `ccvar`: scenario generation, solving and benchmark sweeps for
//! cardinality-constrained mean-CVaR portfolio selection.

mod bench;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ccvar::driver::{self, SolverConfig, Status};
use ccvar::ingest::{self, MomentData};

use report::{AutoOr, CliMethod, ReportFile, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ccvar", version, about = "Cardinality-constrained mean-CVaR portfolio optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample return scenarios from moment data.
    Gen(GenArgs),
    /// Solve one instance and write a JSON report.
    Solve(SolveArgs),
    /// Run a parameter grid from a TOML file and write CSV rows.
    Bench(BenchArgs),
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    /// OR-Library portfolio file with means, deviations and correlations.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    orlib: Option<PathBuf>,
    /// Use seeded factor-model moments for this many assets instead.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    /// Number of scenarios to draw.
    #[arg(long, value_name = "S")]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiply means and standard deviations by this factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Scenario file (`S N` header, then one row of returns per scenario).
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum)]
    method: CliMethod,
    /// Regularization weight, or `auto` for 10/√N.
    #[arg(long, default_value = "auto")]
    gamma: AutoOr,
    #[arg(long, default_value_t = driver::DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = driver::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = driver::DEFAULT_DELTA)]
    delta: f64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = driver::DEFAULT_TIME_LIMIT)]
    time_limit: f64,
    /// Required expected return, or `auto` for the top/bottom-k rule.
    #[arg(long, default_value = "auto")]
    mu_bar: AutoOr,
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    /// TOML file describing instances and the parameter grid.
    #[arg(long)]
    config: PathBuf,
    /// CSV output; rows are appended as runs finish.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args).map(|()| 0),
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => bench::run(&args.config, &args.out).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub(crate) fn load_moments(orlib: Option<&Path>, synthetic: Option<(usize, u64)>, scale: f64) -> Result<MomentData> {
    match (orlib, synthetic) {
        (Some(path), _) => {
            ingest::parse_orlibrary(&read(path)?, scale).with_context(|| format!("in {}", path.display()))
        }
        (None, Some((n, seed))) => {
            let m = ingest::synthetic_moments(n, seed);
            let sigma = m.sigma.iter().map(|r| r.iter().map(|v| v * scale * scale).collect()).collect();
            Ok(MomentData::new(m.mu.iter().map(|v| v * scale).collect(), sigma)?)
        }
        (None, None) => bail!("no moment source given"),
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    if args.scenarios == 0 {
        bail!("--scenarios must be positive");
    }
    let moments = load_moments(args.orlib.as_deref(), args.synthetic.map(|n| (n, args.seed)), args.scale)?;
    let rows = ingest::generate_scenarios(&moments, args.scenarios, args.seed)?;
    fs::write(&args.out, ingest::write_scenarios(&rows))
        .with_context(|| format!("cannot write {}", args.out.display()))
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let text = read(&args.scenarios)?;
    let (rows, probs) = ingest::parse_scenarios(&text).with_context(|| format!("in {}", args.scenarios.display()))?;
    let instance = driver::prepare_instance(rows, probs, args.k, args.beta, args.gamma.value(), args.mu_bar.value())?;
    let cfg = SolverConfig { eps: args.eps, delta: args.delta, time_limit: args.time_limit, ..SolverConfig::default() };
    let report = driver::solve(&instance, &cfg, args.method.into())?;

    let config = RunConfig {
        method: args.method,
        k: args.k,
        gamma: args.gamma,
        beta: args.beta,
        eps: args.eps,
        delta: args.delta,
        time_limit_sec: args.time_limit,
        mu_bar: args.mu_bar,
        scenarios: args.scenarios.clone(),
    };
    let file = ReportFile { report, config };
    fs::write(&args.report, file.to_json()?).with_context(|| format!("cannot write {}", args.report.display()))?;
    println!("{}", file.summary_line());
    Ok(match file.report.status {
        Status::Optimal => 0,
        Status::TimeLimit => 2,
        Status::Infeasible => 3,
    })
}
