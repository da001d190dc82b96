use std::process::ExitCode;

use clap::Parser;

use moyal_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            ExitCode::from(report.code)
        }
        Err(e) => {
            eprintln!("moyal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
