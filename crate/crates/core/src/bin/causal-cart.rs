use std::process::ExitCode;

use causal_cart::cli::{exit_code, run_command, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli.command) {
        Ok(lines) => {
            lines.iter().for_each(|l| println!("{l}"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
