//! Command-line front end for `plnet-core`.

pub mod args;
pub mod commands;
pub mod descriptor;
pub mod error;
pub mod format;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::{EXIT_OK, EXIT_USAGE};

/// Runs one invocation and returns the process exit status.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = commands::Context::new(&cli.common).and_then(|ctx| commands::run(&cli.command, &ctx));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("plnet: {e}");
            e.exit_code()
        }
    }
}
