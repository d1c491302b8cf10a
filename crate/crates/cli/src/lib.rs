//! Command-line front end for `numdiff`.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure.

pub mod commands;
pub mod error;
pub mod svg;
pub mod table;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{execute, parse_grid, Cli, Io};
pub use error::{CliError, CliResult};

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to `io.stderr`.
pub fn run<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { io.stderr.write_all(rendered.as_bytes()) } else { io.stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli, io) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
    }
}
