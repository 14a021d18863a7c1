//! The `gwuq` command line: argument parsing, command dispatch, file
//! emission and run manifests.

pub mod cli;
pub mod commands;
pub mod manifest;
pub mod output;

use std::time::Instant;

use anyhow::Result;

use cli::{Cli, Command};
use manifest::RunManifest;
use output::OutDir;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NOT_CONVERGED: u8 = crate::commands::NOT_CONVERGED;
    pub const IO: u8 = 4;
    pub const INVALID_INPUT: u8 = 5;
    pub const SINGULAR: u8 = 6;
    pub const POSTERIOR: u8 = 7;
    pub const INFEASIBLE: u8 = 8;
}

/// Exit code for an error, by its root cause.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use gwuq_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::Io { .. }) => exit::IO,
        Some(E::Parse { .. } | E::Validation(_) | E::InvalidInput(_) | E::Csv(_) | E::Json(_)) => {
            exit::INVALID_INPUT
        }
        Some(E::SingularSystem(_)) => exit::SINGULAR,
        Some(E::NotConverged { .. }) => exit::NOT_CONVERGED,
        Some(E::IndefiniteHessian { .. } | E::LowAcceptance { .. }) => exit::POSTERIOR,
        Some(E::AllInfeasible) => exit::INFEASIBLE,
        Some(E::Tracking(_)) => exit::FAILURE,
        None if err.chain().any(|e| e.downcast_ref::<std::io::Error>().is_some()) => exit::IO,
        None => exit::FAILURE,
    }
}

fn dispatch(cmd: &Command, out: &mut OutDir) -> Result<commands::Outcome> {
    match cmd {
        Command::Solve(a) => commands::solve(a, out),
        Command::Track(a) => commands::track(a, out),
        Command::Calibrate(a) => commands::calibrate_cmd(a, out),
        Command::Identify(a) => commands::identify(a, out),
        Command::Uq(a) => commands::uq(a, out),
        Command::MakeSynthetic(a) => commands::make_synthetic(a, out),
    }
}

fn args_value(cmd: &Command) -> Result<serde_json::Value> {
    Ok(match cmd {
        Command::Solve(a) => serde_json::to_value(a)?,
        Command::Track(a) => serde_json::to_value(a)?,
        Command::Calibrate(a) => serde_json::to_value(a)?,
        Command::Identify(a) => serde_json::to_value(a)?,
        Command::Uq(a) => serde_json::to_value(a)?,
        Command::MakeSynthetic(a) => serde_json::to_value(a)?,
    })
}

/// Runs a parsed command and writes `run_manifest.json` next to its
/// outputs. Returns the exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let start = Instant::now();
    let common = cli.command.common();
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let mut out = OutDir::create(&common.out_dir)?;
    let outcome = pool.install(|| dispatch(&cli.command, &mut out))?;
    let inputs: Vec<&std::path::Path> = outcome.inputs.iter().map(|p| p.as_path()).collect();
    let mut manifest = RunManifest::new(cli.command.name(), common.seed, &args_value(&cli.command)?, &inputs)?;
    manifest.counters = outcome.counters;
    manifest.outputs = out.written().to_vec();
    manifest.workers = workers;
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    out.json("run_manifest.json", &manifest)?;
    Ok(outcome.exit_code)
}
