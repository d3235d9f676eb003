//! `elastica`: scenario-driven front end for the ∞-elastica solver.

mod commands;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use commands::Outcome;
use elastica_core::ManifoldModel;
use scenario::{Scenario, Thresholds};

#[derive(Debug, Parser)]
#[command(name = "elastica", version, about = "Minimal max-curvature clamped curves via p-continuation")]
struct Cli {
    /// Number of scenarios processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output root; scenario results go to `<out>/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the p-continuation for one or more scenarios.
    Solve {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Mesh study: solve at each listed segment count.
        #[arg(long, value_delimiter = ',')]
        mesh: Option<Vec<usize>>,
    },
    /// Recompute the verification residuals of a curve CSV.
    Verify {
        curve: PathBuf,
        #[arg(long)]
        p: f64,
        /// Length multiplier; fitted when omitted.
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        #[arg(long, default_value = "euclidean")]
        model: String,
        #[arg(long, default_value_t = 2)]
        dimension: usize,
        #[arg(long, default_value_t = Thresholds::default().el1)]
        el1_max: f64,
        #[arg(long, default_value_t = Thresholds::default().el2)]
        el2_max: f64,
    },
    /// Planar arc-chain ground truth for one or more scenarios.
    Oracle {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
}

fn run_scenarios(
    paths: &[PathBuf],
    jobs: usize,
    f: impl Fn(&scenario::LoadedScenario) -> Result<Outcome> + Sync,
) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start worker pool")?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        paths
            .par_iter()
            .map(|path| {
                match Scenario::read(path).and_then(|sc| f(&sc)) {
                    Ok(o) => o,
                    Err(e) => {
                        eprintln!("error: {}: {e:#}", path.display());
                        Outcome::Failure
                    }
                }
            })
            .collect()
    });
    Ok(outcomes.into_iter().fold(Outcome::Success, Outcome::worst))
}

fn run(cli: Cli) -> Result<Outcome> {
    let root = cli.out.as_deref();
    match &cli.command {
        Command::Solve { scenarios, mesh } => run_scenarios(scenarios, cli.jobs, |sc| {
            commands::cmd_solve(sc, root, mesh.as_deref())
        }),
        Command::Verify {
            curve,
            p,
            lambda,
            model,
            dimension,
            el1_max,
            el2_max,
        } => {
            let model = ManifoldModel::from_id(model, *dimension)?;
            let thresholds = Thresholds {
                el1: *el1_max,
                el2: *el2_max,
            };
            commands::cmd_verify(curve, model, *p, *lambda, thresholds, root.unwrap_or(Path::new(".")))
        }
        Command::Oracle { scenarios } => {
            run_scenarios(scenarios, cli.jobs, |sc| commands::cmd_oracle(sc, root))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => ExitCode::from(o.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Outcome::Failure.code() as u8)
        }
    }
}
