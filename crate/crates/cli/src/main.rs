//! `cn-alloc` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use cn_alloc::io::{emit_instance_json, emit_plot, emit_sweep_csv, parse_config, read_sweep_csv, InstanceReport};
use cn_alloc::metrics::{ratio_grid, run_instance, sweep};
use cn_alloc::{Config, Error, Method};

const EXIT_USAGE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "cn-alloc", version, about = "Cournot-Nash resource allocation over random cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, solve and report one instance as JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the configured method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Overrides the configured `density_ratio` (users per station).
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo sweep over density ratios, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Density ratio grid `start:stop:step`.
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        iterations: usize,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Base seed of the sweep.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Print the r_u / r_n crossing of a sweep CSV, or "none".
    Crossing {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Approximate,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Approximate => Method::Approximate,
        }
    }
}

/// Some sweep instances failed to solve; the averages exclude them.
#[derive(Debug)]
struct SolverFailures(usize);

impl std::fmt::Display for SolverFailures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} instance(s) failed to solve and were left out of the averages", self.0)
    }
}

impl std::error::Error for SolverFailures {}

/// Exit code for a failure, from the library error when there is one.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<SolverFailures>() {
        return EXIT_NONCONVERGENCE;
    }
    match err.downcast_ref::<Error>().map(Error::root) {
        Some(Error::NonConvergence { .. }) => EXIT_NONCONVERGENCE,
        Some(Error::Io { .. } | Error::Format(_)) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn load_config(path: &Path, method: Option<MethodArg>) -> anyhow::Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut config = parse_config(&text)?;
    if let Some(m) = method {
        config.method = m.into();
    }
    Ok(config)
}

fn parse_ratios(grid: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(anyhow!("--ratios expects start:stop:step, got `{grid}`"));
    };
    let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("--ratios: `{s}` is not a number"));
    Ok(ratio_grid(num(start)?, num(stop)?, num(step)?)?)
}

fn simulate(config: &Path, seed: u64, method: Option<MethodArg>, ratio: Option<f64>, out: &Path) -> anyhow::Result<()> {
    let mut config = load_config(config, method)?;
    if let Some(r) = ratio {
        config.density_ratio = r;
        config.validate()?;
    }
    let scenario = config.scenario()?;
    let outcome = run_instance(&scenario, config.density_ratio * config.lambda_n, seed)?;
    emit_instance_json(&InstanceReport::from_outcome(&config, seed, &outcome), out)?;
    Ok(())
}

fn run_sweep(
    config: &Path,
    ratios: &str,
    iterations: usize,
    method: Option<MethodArg>,
    seed: u64,
    out: &Path,
    plot: Option<&Path>,
) -> anyhow::Result<()> {
    let config = load_config(config, method)?;
    let ratios = parse_ratios(ratios)?;
    if iterations == 0 {
        return Err(anyhow!("--iterations must be at least 1"));
    }
    let result = sweep(&config.scenario()?, &ratios, iterations, seed)?;
    emit_sweep_csv(&result, out)?;
    if let Some(path) = plot {
        emit_plot(&result, path)?;
    }
    if !result.failures.is_empty() {
        for f in &result.failures {
            eprintln!("ratio {} seed {}: {}", f.density_ratio, f.seed, f.message);
        }
        return Err(SolverFailures(result.failures.len()).into());
    }
    Ok(())
}

fn crossing(input: &Path) -> anyhow::Result<()> {
    let file = fs::File::open(input).map_err(|e| Error::Io { path: input.to_path_buf(), source: e })?;
    let result = read_sweep_csv(file)?;
    match result.crossing {
        Some(c) => println!("ratio {} level {}", c.ratio, c.level),
        None => println!("none"),
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("CN_ALLOC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("CN_ALLOC_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate { config, seed, method, ratio, out } => simulate(config, *seed, *method, *ratio, out),
        Command::Sweep { config, ratios, iterations, method, seed, out, plot } => {
            run_sweep(config, ratios, *iterations, *method, *seed, out, plot.as_deref())
        }
        Command::Crossing { input } => crossing(input),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
