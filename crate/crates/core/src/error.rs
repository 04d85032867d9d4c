use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands disagree on site count or vector dimension.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// Dense work requested beyond the supported system size.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The instantaneous ground state is (nearly) degenerate.
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("integration did not converge: {0}")]
    Convergence(String),

    /// A result failed a self-consistency check (e.g. lost Hermiticity).
    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short category name, also used to pick the process exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::Capacity(_) => "capacity",
            Error::InvalidArgument(_) => "usage",
            Error::Degenerate(_) => "degenerate",
            Error::Convergence(_) => "convergence",
            Error::Consistency(_) => "consistency",
            Error::Config(_) | Error::Json(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Prefixes the message with `ctx`, keeping the category.
    pub fn context(self, ctx: &str) -> Error {
        match self {
            Error::Structural(m) => Error::Structural(format!("{ctx}: {m}")),
            Error::Capacity(m) => Error::Capacity(format!("{ctx}: {m}")),
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
            Error::Convergence(m) => Error::Convergence(format!("{ctx}: {m}")),
            Error::Consistency(m) => Error::Consistency(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Json(e) => Error::Config(format!("{ctx}: {e}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{ctx}: {e}"))),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Config(_) | Error::Json(_) => 3,
            Error::Io(_) => 4,
            Error::Capacity(_) => 5,
            Error::Degenerate(_) => 6,
            Error::Convergence(_) => 7,
            Error::Structural(_) | Error::Consistency(_) => 8,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
