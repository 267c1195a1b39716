use std::process::ExitCode;

use clap::Parser;
use relay_outage::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.csv.display());
            if outcome.failures > 0 {
                eprintln!("{} validation check(s) failed", outcome.failures);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
