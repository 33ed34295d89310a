use std::process::ExitCode;

use chernlab_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli.resolve().and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            println!("{}", out.csv.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
