use std::path::PathBuf;

/// Errors produced by the library.
///
/// Each variant maps to a process exit status through [`Error::exit_code`]:
/// malformed input is `2`, a violated data invariant is `3`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value or argument violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is well formed but too small or too uniform to process.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A file could not be parsed.
    #[error("{}format error{}: {message}", path_prefix(.path), line_suffix(.line))]
    Format {
        path: Option<PathBuf>,
        line: Option<u64>,
        message: String,
    },

    /// Parsed data breaks a structural invariant (asymmetry, out-of-range similarity, ...).
    #[error("{}invariant violation: {message}", path_prefix(.path))]
    Invariant {
        path: Option<PathBuf>,
        message: String,
    },

    /// A brute-force oracle was asked to handle more objects than it supports.
    #[error("oracle scope exceeded: {0}")]
    OracleScope(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

fn line_suffix(line: &Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn format(line: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant {
            path: None,
            message: msg.into(),
        }
    }

    /// Attach a file path to format and invariant errors that lack one.
    pub fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format {
                path: None,
                line,
                message,
            } => Error::Format {
                path: Some(p.into()),
                line,
                message,
            },
            Error::Invariant {
                path: None,
                message,
            } => Error::Invariant {
                path: Some(p.into()),
                message,
            },
            other => other,
        }
    }

    /// Process exit status for this error: 2 for usage/format problems, 3 for data invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant { .. } | Error::Degenerate(_) => 3,
            Error::InvalidInput(_)
            | Error::Format { .. }
            | Error::OracleScope(_)
            | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
