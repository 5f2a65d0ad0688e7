use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = pmlmc_harness::cli::Cli::parse();
    match pmlmc_harness::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
