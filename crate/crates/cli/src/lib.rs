//! Command-line front end over `bellsim-core`: seeded experiment runs,
//! counterfactual tables, inequality reports, and replay/ingest of saved
//! data.
//!
//! Exit codes: 0 for a completed run (whatever its verdicts say), 2 for
//! configuration and usage problems, 3 for I/O failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub mod config;
pub mod ingest;
pub mod output;
pub mod runner;

use config::{Cli, Command};
use output::{write_run, RunOutput, SummaryFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<bellsim_core::Error> for CliError {
    fn from(e: bellsim_core::Error) -> CliError {
        CliError::Config(e.to_string())
    }
}

/// Runs one parsed command and returns the text to print on stdout.
///
/// With an out dir the run is persisted there and a status line comes back;
/// without one the summary JSON itself is the output.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    let (output, out_dir): (RunOutput, Option<PathBuf>) = match &cli.command {
        Command::SingletRun(args) => (runner::singlet_run(args)?, args.common.out_dir.clone()),
        Command::ChainRun(args) => (runner::chain_run(args)?, args.common.out_dir.clone()),
        Command::Chsh(args) => {
            (runner::abi_run(bellsim_core::AbiKind::V4, args)?, args.common.out_dir.clone())
        }
        Command::V3(args) => {
            (runner::abi_run(bellsim_core::AbiKind::V3, args)?, args.common.out_dir.clone())
        }
        Command::McdTable(args) => (runner::mcd_run(args)?, args.common.out_dir.clone()),
        Command::AuditReplay(args) => (runner::audit_replay(args)?, args.out_dir.clone()),
        Command::BoundOracle => (runner::bound_oracle_run(), None),
        Command::Ingest(args) => (ingest::ingest(args)?, args.out_dir.clone()),
    };
    match out_dir {
        Some(dir) => {
            let summary_path = write_run(&dir, &output)?;
            Ok(format!("{}\nwrote {}\n", output.status, summary_path.display()))
        }
        None => Ok(SummaryFile::new(output.summary).to_json()),
    }
}

/// Full CLI entry point; parses `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
