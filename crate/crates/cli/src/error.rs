use std::path::PathBuf;

use thiserror::Error;

/// Errors that stop a run before or outside check execution.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: parse error: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no scenario file or bundled scenario named `{0}`")]
    UnknownScenario(String),

    #[error("two scenarios write the same report {}", .0.display())]
    DuplicateReport(PathBuf),

    #[error("unknown plot axis `{0}` (expected `x` or `index`)")]
    UnknownAxis(String),

    #[error("{}: malformed report: {message}", path.display())]
    Report { path: PathBuf, message: String },
}

impl CliError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}
