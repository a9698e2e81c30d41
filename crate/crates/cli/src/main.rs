//! `strongeq` command line: evaluate, classify and solve equilibrium
//! problems, run the discrete and Monte Carlo experiments, and reproduce
//! the built-in examples.

mod commands;
mod error;
mod report;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::report::{emit, RunReport};

#[derive(Parser)]
#[command(
    name = "strongeq",
    version,
    about = "Weak and strong equilibria of time-inconsistent Markov chain control"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Seed for Monte Carlo paths.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the JSON report and CSV sidecars; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fixed-point stopping tolerance of the solvers.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Relative tie tolerance of the classifiers.
    #[arg(long, global = true)]
    pub tie_rel: Option<f64>,
}

/// Where the model, candidate and deviation come from.
#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Model file (.json or .toml).
    pub config: Option<PathBuf>,
    /// Built-in example instead of a file.
    #[arg(long, conflicts_with = "config")]
    pub example: Option<String>,
    /// Parameter k of eg51.
    #[arg(long)]
    pub k: Option<f64>,
    /// Candidate generator as full rows, e.g. "-0.4,0.4;0.6,-0.6".
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Two-state candidate rates a,b.
    #[arg(long, value_delimiter = ',', conflicts_with = "q")]
    pub ab: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
pub struct DeviationArgs {
    /// Deviation generator as full rows.
    #[arg(long, allow_hyphen_values = true)]
    pub dev: Option<String>,
    /// Two-state deviation rates a,b.
    #[arg(long, value_delimiter = ',', conflicts_with = "dev")]
    pub dev_ab: Option<Vec<f64>>,
}

#[derive(Copy, Clone, ValueEnum)]
pub enum SelectionArg {
    Nearest,
    Lexicographic,
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Quasi-random starting points.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Rule picking one row from a tied best response.
    #[arg(long, value_enum, default_value_t = SelectionArg::Nearest)]
    pub selection: SelectionArg,
}

#[derive(Subcommand)]
enum Command {
    /// Payoff vectors F and G at the candidate.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        dev: DeviationArgs,
        /// Also evaluate the deviation concatenated over [0, eps].
        #[arg(long)]
        eps: Option<f64>,
    },
    /// First-order (weak) equilibrium test.
    Weak {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Full classification of the candidate.
    Strong {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Damped best-response search from several starts.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Deviation gain over a grid of windows.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        dev: DeviationArgs,
        /// Deviating state, 1-based.
        #[arg(long)]
        state: usize,
        /// Decreasing windows; defaults to 0.1·2^-k, k = 0..11.
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
    },
    /// Monte Carlo estimate of a payoff, compared with the resolvent value.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        dev: DeviationArgs,
        /// Initial state, 1-based.
        #[arg(long)]
        state: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Estimate the concatenated payoff with this window instead.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Discrete-time model at one mesh: solve, or check the candidate.
    Discrete {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        mesh: f64,
        /// Check the candidate instead of solving.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Mesh-refinement experiment and classification of the limit.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        /// Decreasing meshes; defaults to the example's or 0.1,0.05,0.02,0.01.
        #[arg(long, value_delimiter = ',')]
        meshes: Option<Vec<f64>>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Re-run a built-in example and compare with its expected values.
    Reproduce {
        /// One of eg41, eg42, eg43, eg51, eg52.
        id: String,
        /// Parameter k of eg51.
        #[arg(long)]
        k: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Eval { .. } => "eval".into(),
            Command::Weak { .. } => "weak".into(),
            Command::Strong { .. } => "strong".into(),
            Command::Solve { .. } => "solve".into(),
            Command::Sweep { .. } => "sweep".into(),
            Command::Mc { .. } => "mc".into(),
            Command::Discrete { .. } => "discrete".into(),
            Command::Converge { .. } => "converge".into(),
            Command::Reproduce { id, .. } => format!("reproduce {id}"),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let start = Instant::now();
    let g = &cli.global;
    let out = match &cli.command {
        Command::Eval { model, dev, eps } => commands::eval(model, dev, *eps)?,
        Command::Weak { model } => commands::weak(g, model)?,
        Command::Strong { model } => commands::strong(g, model)?,
        Command::Solve { model, solver } => commands::solve(g, model, solver)?,
        Command::Sweep {
            model,
            dev,
            state,
            eps_grid,
        } => commands::sweep(model, dev, *state, eps_grid.clone())?,
        Command::Mc {
            model,
            dev,
            state,
            paths,
            eps,
        } => commands::mc(g, model, dev, *state, *paths, *eps)?,
        Command::Discrete {
            model,
            mesh,
            check,
            solver,
        } => commands::discrete(g, model, *mesh, *check, solver)?,
        Command::Converge {
            model,
            meshes,
            solver,
        } => commands::converge(g, model, meshes.clone(), solver)?,
        Command::Reproduce { id, k } => reproduce::reproduce(g, id, *k)?,
    };
    let report = RunReport {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        model_digest: out.digest,
        seed: g.seed,
        results: out.results,
        comparisons: out.comparisons,
        verdicts: out.verdicts,
        wall_time: start.elapsed().as_secs_f64(),
    };
    emit(&report, &out.sidecars, g.out.as_deref())?;
    out.failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.body() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
