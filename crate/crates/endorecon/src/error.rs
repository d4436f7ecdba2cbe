use std::path::{Path, PathBuf};

/// Failure of a pipeline command. Each variant maps onto a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message} at byte offset {offset}", path.display())]
    Parse { path: PathBuf, offset: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] endorecon_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Exit status for usage errors (bad flags, bad config values).
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable or inconsistent input data.
pub const EXIT_DATA: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use endorecon_core::Error as E;
        match self {
            Error::Usage(_) => EXIT_USAGE,
            Error::Io { .. } | Error::Parse { .. } => EXIT_DATA,
            Error::Core(e) => match e {
                E::InvalidConfig(_) | E::InvalidSpec(_) | E::InvalidIntrinsics(_) => EXIT_USAGE,
                E::AllSectionsFailed { .. } | E::NoIntersection | E::OpenContour | E::DegenerateMesh => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            },
        }
    }
}

/// Parse failure inside an in-memory buffer; gains a path when surfaced.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    pub offset: u64,
    pub message: String,
}

impl FormatError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self { offset: offset as u64, message: message.into() }
    }

    pub fn at(self, path: &Path) -> Error {
        Error::Parse { path: path.to_path_buf(), offset: self.offset, message: self.message }
    }
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at byte offset {}", self.message, self.offset)
    }
}
