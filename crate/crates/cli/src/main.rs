//! `stablim` command-line front end.
//!
//! Exit codes: 0 on success, 1 when the input is well formed but the
//! computation fails (invalid snapshot, infeasible model, ...), 2 on usage
//! errors. Reports go to `--out` (stdout with `-`) and are written
//! atomically; logs go to stderr.

mod grid;
mod limits;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use stablim::milp::Limits;

#[derive(Parser)]
#[command(name = "stablim", version, about = "Stability-limit MILP toolkit: limit expressions, reserve adequacy, hydro commitment")]
struct Cli {
    /// Log verbosity on stderr.
    #[arg(long, global = true, default_value = "warn", value_name = "LEVEL")]
    log_level: LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, simplify or linearize a limit expression.
    Limits {
        #[command(subcommand)]
        action: LimitsCommand,
    },
    /// Check a snapshot file.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotCommand,
    },
    /// Reserve adequacy monitoring.
    Adequacy {
        #[command(subcommand)]
        action: AdequacyCommand,
    },
    /// Remedial-action selection for a deficit step.
    Restore {
        #[command(subcommand)]
        action: RestoreCommand,
    },
    /// Hydro unit commitment.
    Huc {
        #[command(subcommand)]
        action: HucCommand,
    },
    /// Solve a model in LP format and dump the solution as JSON.
    Solve {
        lp: PathBuf,
        #[command(flatten)]
        limits: SolverArgs,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
pub struct ExprInput {
    /// Expression text; read from --file or stdin when absent.
    pub expr: Option<String>,
    #[arg(long, conflicts_with = "expr")]
    pub file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LimitsCommand {
    /// Print the canonical form and tree of an expression.
    Parse {
        #[command(flatten)]
        input: ExprInput,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Normalize, prune against variable domains and factor shared subtrees.
    Simplify {
        #[command(flatten)]
        input: ExprInput,
        /// JSON object mapping variable names to `[lo, hi]`.
        #[arg(long)]
        domains: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Encode `x <= e` (or `x >= e` with --lower) as MILP rows.
    Linearize {
        #[command(flatten)]
        input: ExprInput,
        #[arg(long)]
        domains: PathBuf,
        #[arg(long)]
        lower: bool,
        /// Constraint name used in row and variable names.
        #[arg(long, default_value = "limit")]
        name: String,
        /// Also write the rows in LP format here.
        #[arg(long)]
        lp: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SnapshotCommand {
    /// Validate a snapshot and print a summary.
    Validate {
        file: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
pub struct SolverArgs {
    /// Wall-clock limit per solve, seconds.
    #[arg(long, value_parser = positive_f64)]
    pub timeout: Option<f64>,
    /// Branch-and-bound node limit per solve.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub nodes: Option<u64>,
    /// Relative optimality gap.
    #[arg(long, value_parser = non_negative_f64)]
    pub gap: Option<f64>,
}

impl SolverArgs {
    pub fn limits(&self) -> Limits {
        let mut l = Limits::default();
        l.time = self.timeout.map(Duration::from_secs_f64);
        l.nodes = self.nodes.map(|n| n as usize);
        if let Some(g) = self.gap {
            l.gap = g;
        }
        l
    }
}

#[derive(Subcommand)]
enum AdequacyCommand {
    /// Solve every monitored (reserve, step) pair.
    Run {
        #[arg(long)]
        snapshot: PathBuf,
        /// Comma-separated reserves.
        #[arg(long, value_delimiter = ',', default_value = "10S,10NS,30NS")]
        reserves: Vec<stablim::grid::ReserveKind>,
        /// `a..b`, `a..=b`, `t` or a comma list; all steps by default.
        #[arg(long)]
        steps: Option<String>,
        /// Worker threads; the report does not depend on it.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        parallelism: Option<u64>,
        #[command(flatten)]
        limits: SolverArgs,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Also write the margin time series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RestoreCommand {
    /// Pick the cheapest remedial actions clearing every deficit of a step.
    Run {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        step: usize,
        #[command(flatten)]
        limits: SolverArgs,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum HucCommand {
    /// Build and solve the commitment problem.
    Run {
        #[arg(long)]
        snapshot: PathBuf,
        /// Future steps to schedule; the whole snapshot by default.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        horizon: Option<u64>,
        #[command(flatten)]
        limits: SolverArgs,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Also export the built model in LP format.
        #[arg(long)]
        lp: Option<PathBuf>,
        /// Also dump every variable value as JSON.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

/// A command line that parsed but asks for something impossible.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Limits { action } => match action {
            LimitsCommand::Parse { input, out } => limits::parse(&input, &out),
            LimitsCommand::Simplify { input, domains, out } => limits::simplify(&input, &domains, &out),
            LimitsCommand::Linearize {
                input,
                domains,
                lower,
                name,
                lp,
                out,
            } => limits::linearize(&input, &domains, lower, &name, lp.as_deref(), &out),
        },
        Command::Snapshot {
            action: SnapshotCommand::Validate { file, out },
        } => grid::validate(&file, &out),
        Command::Adequacy {
            action:
                AdequacyCommand::Run {
                    snapshot,
                    reserves,
                    steps,
                    parallelism,
                    limits,
                    out,
                    csv,
                },
        } => {
            let threads = parallelism
                .map(|p| p as usize)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            grid::adequacy(&grid::AdequacyRun {
                snapshot: &snapshot,
                reserves: &reserves,
                steps: steps.as_deref(),
                parallelism: threads,
                limits: limits.limits(),
                out: &out,
                csv: csv.as_deref(),
            })
        }
        Command::Restore {
            action: RestoreCommand::Run { snapshot, step, limits, out },
        } => grid::restore(&snapshot, step, &limits.limits(), &out),
        Command::Huc {
            action:
                HucCommand::Run {
                    snapshot,
                    horizon,
                    limits,
                    out,
                    lp,
                    solution,
                },
        } => grid::huc(&grid::HucRun {
            snapshot: &snapshot,
            horizon: horizon.map(|h| h as usize),
            limits: limits.limits(),
            out: &out,
            lp: lp.as_deref(),
            solution: solution.as_deref(),
        }),
        Command::Solve { lp, limits, out } => grid::solve(&lp, &limits.limits(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
