use std::process::ExitCode;

use clap::Parser;
use discdiff::runner::{run, Cli};
use discdiff::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Json { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
