use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", located(.path, .source))]
    Input {
        path: PathBuf,
        #[source]
        source: tdshift_core::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] tdshift_core::Error),

    #[error(transparent)]
    Sim(#[from] tdshift_sim::SimError),

    #[error("cannot write {}: {source}", .path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A checked theoretical property failed; the report was still written.
    #[error("{0}")]
    Assertion(String),
}

fn located(path: &Path, e: &tdshift_core::Error) -> String {
    match e {
        tdshift_core::Error::Parse { line, message } => format!("{}:{line}: {message}", path.display()),
        other => format!("{}: {other}", path.display()),
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 3,
            CliError::Sim(tdshift_sim::SimError::StateHole(_)) => 3,
            _ => 2,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Input { source, .. } => source.code(),
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.code(),
            CliError::Sim(e) => e.code(),
            CliError::Output { .. } => "output",
            CliError::Assertion(_) => "assertion-failed",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches `path` to errors raised while reading it.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> WithPath<T> for tdshift_core::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })
    }
}
