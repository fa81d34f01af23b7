//! Command-line front end for `cavity-ness`: single-point reports, parameter
//! sweeps, time evolution and a validation suite.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use args::{Cli, Command};
use commands::Outcome;
use error::CliResult;

/// Runs one parsed invocation and returns the text to emit.
pub fn run(cli: &Cli) -> CliResult<(Outcome, Option<std::path::PathBuf>)> {
    match &cli.command {
        Command::Steady { common } => {
            let r = config::resolve(common, None)?;
            Ok((commands::cmd_steady(&r)?, common.out.clone()))
        }
        Command::Sweep { common, sweep } => {
            let r = config::resolve(common, Some(sweep))?;
            Ok((commands::cmd_sweep(&r)?, common.out.clone()))
        }
        Command::Dynamics { common, dynamics } => {
            let r = config::resolve(common, None)?;
            Ok((commands::cmd_dynamics(&r, dynamics)?, common.out.clone()))
        }
        Command::Validate { common, validate } => {
            let r = config::resolve(common, None)?;
            Ok((commands::cmd_validate(&r, validate)?, common.out.clone()))
        }
    }
}
