use std::process::ExitCode;

use clap::Parser;
use gmmse::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(rendered) => {
            let written = match &rendered.out {
                Some(path) => std::fs::write(path, &rendered.text),
                None => {
                    print!("{}", rendered.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            if rendered.partial_failure {
                eprintln!("error: one or more methods failed; see output");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
