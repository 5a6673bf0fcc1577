use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

/// A command failure. Each variant maps to a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Unwritable { path: PathBuf, message: String },
    CorruptCorpus { path: PathBuf, line: usize, message: String },
    MissingArtifact { path: PathBuf },
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) => 1,
            CliError::Unwritable { .. } => 2,
            CliError::CorruptCorpus { .. } => 3,
            CliError::MissingArtifact { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Unwritable { .. } => "unwritable",
            CliError::CorruptCorpus { .. } => "corrupt_corpus",
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::Failed(_) => "failed",
        }
    }

    pub fn unwritable(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Unwritable {
            path: path.to_owned(),
            message: err.to_string(),
        }
    }

    /// Classifies an error raised while opening an input artifact.
    pub fn reading(path: &Path, err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::NotFound {
            CliError::MissingArtifact {
                path: path.to_owned(),
            }
        } else {
            CliError::Failed(format!("{}: {err}", path.display()))
        }
    }

    pub fn in_file(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Failed(format!("{}: {err}", path.display()))
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders as `error kind=<kind> [path=<path>] [line=<n>] message=<text>` on a
/// single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error kind={}", self.kind())?;
        match self {
            CliError::Usage(m) | CliError::Failed(m) => write!(f, " message={}", one_line(m)),
            CliError::Unwritable { path, message } => {
                write!(f, " path={} message={}", path.display(), one_line(message))
            }
            CliError::CorruptCorpus {
                path,
                line,
                message,
            } => write!(
                f,
                " path={} line={line} message={}",
                path.display(),
                one_line(message)
            ),
            CliError::MissingArtifact { path } => {
                write!(f, " path={} message=missing input artifact", path.display())
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<unravel_core::Error> for CliError {
    fn from(err: unravel_core::Error) -> Self {
        CliError::Failed(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
