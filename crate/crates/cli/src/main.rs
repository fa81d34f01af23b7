use std::process::ExitCode;

use cavity_ness_cli::args::Cli;
use cavity_ness_cli::output::write_output;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cavity_ness_cli::run(&cli) {
        Ok((outcome, out)) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            match write_output(out.as_deref(), &outcome.body) {
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
                Ok(()) => match &outcome.failure {
                    Some(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                    None => 0,
                },
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
