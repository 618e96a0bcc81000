use std::process::ExitCode;

use clap::Parser;

use pullback_cli::args::Cli;
use pullback_cli::{run, EXIT_FAILURE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
