mod args;
mod commands;
mod emit;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(&cli) {
        Ok(failed) if failed.is_empty() => ExitCode::SUCCESS,
        Ok(failed) => {
            for id in &failed {
                eprintln!("failed: {id}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("jacobi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
