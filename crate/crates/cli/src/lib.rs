//! Command-line driver for the `admitlab` library.
//!
//! `run` parses arguments, validates every parameter, computes, and only
//! then writes output (atomically when a path is given). Exit codes: 0 on
//! success, 2 on usage or validation errors, 1 on computation or I/O
//! failures. `ADMITLAB_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod output;

pub const THREADS_ENV: &str = "ADMITLAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(admitlab::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<admitlab::Error> for CliError {
    fn from(e: admitlab::Error) -> Self {
        match e {
            admitlab::Error::InvalidArgument { .. } | admitlab::Error::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| CliError::Usage(format!("cannot build a pool of {threads} threads: {e}")))
}

fn execute(cli: args::Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    let emission = match pool {
        Some(pool) => pool.install(|| commands::dispatch(cli.command))?,
        None => commands::dispatch(cli.command)?,
    };
    for (path, contents) in &emission.files {
        match path {
            Some(p) => output::write_atomic(p, contents)?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(contents.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
            }
        }
    }
    Ok(())
}

/// Runs the driver on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
