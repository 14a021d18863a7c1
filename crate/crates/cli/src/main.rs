use std::process::ExitCode;

use clap::Parser;

use gwuq_cli::cli::Cli;
use gwuq_cli::{exit_code, run};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
