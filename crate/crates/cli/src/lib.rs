//! Command-line front end for `srlssvm`: train, predict, eval, gridsearch
//! and bench subcommands.
//!
//! Every subcommand returns the text it would print, so the binary stays a
//! thin wrapper and the commands can be driven directly from tests.

pub mod bench;
pub mod config;
pub mod grid;
pub mod input;
pub mod output;
pub mod train;

use std::path::{Path, PathBuf};

pub use config::{Cli, Command, CommandKind, Opts, Settings};

/// Caps the worker pool used by training and by parallel trials.
pub const THREADS_ENV: &str = "SRLSSVM_THREADS";

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] srlssvm::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if !e.is_data_error() => EXIT_NUMERICAL,
            CliError::Core(_) | CliError::Io { .. } => EXIT_DATA,
        }
    }
}

/// Builds the global thread pool, honoring [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool that already exists (e.g. in tests) keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let (kind, opts) = cli.command.split();
    let settings = Settings::resolve(kind, opts)?;
    match kind {
        CommandKind::Train => train::run_train(&settings),
        CommandKind::Predict => train::run_predict(&settings),
        CommandKind::Eval => train::run_eval(&settings),
        CommandKind::Gridsearch => grid::run_gridsearch(&settings),
        CommandKind::Bench => bench::run_bench(&settings),
    }
}
