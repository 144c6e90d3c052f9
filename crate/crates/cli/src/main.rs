use std::process::ExitCode;

use clap::Parser;
use optdesign_cli::{configure_threads, run, Cli, EXIT_OK, EXIT_PARSE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return ExitCode::from(if e.use_stderr() {
                EXIT_PARSE as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let outcome = configure_threads().and_then(|()| run(&cli));
    match outcome {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
