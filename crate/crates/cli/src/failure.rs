use std::fmt;
use std::path::Path;

/// A failed run, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag values (exit status 2).
    Usage(String),
    /// Unreadable, malformed or inconsistent input data (exit status 3).
    Data(String),
    /// Anything else (exit status 4).
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    /// Prefixes the message with the offending file.
    pub fn at(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{p}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{p}: {m}")),
            Failure::Internal(m) => Failure::Internal(format!("{p}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<gridfuse::Error> for Failure {
    fn from(e: gridfuse::Error) -> Self {
        match e {
            gridfuse::Error::Convergence { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Errors from validating flag-derived parameters are usage errors.
pub fn flag<T>(r: gridfuse::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}
