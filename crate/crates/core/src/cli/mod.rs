//! Command-line surface: TOML configuration, run orchestration into one
//! directory per run, and reports over finished runs.
//!
//! Exit codes: 0 success, 1 a report check failed, 2 configuration,
//! 3 numerical failure, 4 I/O.

mod args;
pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::Parser;

pub use args::{Action, Cli, RunArgs};
pub use config::{parse_config, parse_config_for, Command, RunConfig};
pub use report::{report, Report, ReportOptions};
pub use run::{run, Artifacts};

use crate::error::{Error, Result};

/// Exit code of a report with a failing check.
pub const EXIT_CHECK_FAILED: i32 = 1;

fn execute(command: Command, a: &RunArgs) -> Result<Vec<String>> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let mut cfg = parse_config_for(&text, Some(command))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let dir = a
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(command.as_str()));
    let art = run(&cfg, &text, &dir, a.overwrite)?;
    let mut lines = art.summary;
    lines.push(format!("wrote {}", dir.display()));
    Ok(lines)
}

/// Parse `argv`, run, print, and return the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.action {
        Action::FpRun(a) => execute(Command::FpRun, a),
        Action::OuRun(a) => execute(Command::OuRun, a),
        Action::AlphaSweep(a) => execute(Command::AlphaSweep, a),
        Action::Markov(a) => execute(Command::Markov, a),
        Action::LandscapeCheck(a) => execute(Command::LandscapeCheck, a),
        Action::Ensemble(a) => execute(Command::Ensemble, a),
        Action::Report { dir, abs_tol, rel_tol } => {
            match report(dir, ReportOptions { abs_tol: *abs_tol, rel_tol: *rel_tol }) {
                Ok(r) => {
                    for l in &r.lines {
                        println!("{l}");
                    }
                    return if r.passed() { 0 } else { EXIT_CHECK_FAILED };
                }
                Err(e) => Err(e),
            }
        }
    };
    match outcome {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}
