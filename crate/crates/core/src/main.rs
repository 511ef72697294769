use std::process::ExitCode;

use clap::Parser;
use qdivide::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = cli::configure_threads().and_then(|()| cli::run(&args));
    match result {
        Ok(()) => ExitCode::from(cli::EXIT_OK as u8),
        Err(e) => {
            eprintln!("qdivide: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
