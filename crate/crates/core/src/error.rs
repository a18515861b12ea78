//! Error type shared by every module of the crate.

use std::fmt;

/// Failure modes of the numerical and data-handling layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("invalid value at row {row}, field `{field}`: {msg}")]
    Invariant {
        row: usize,
        field: String,
        msg: String,
    },
    #[error("{what} {value:e} outside coverage [{lo:e}, {hi:e}]")]
    Coverage {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("root bracketing failed: {0}")]
    Bracket(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Displays the whole chain itself, so it does not expose `source()`.
    #[error("{context}: {inner}")]
    Context {
        context: String,
        inner: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { inner, .. } => inner.root(),
            e => e,
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Invariant { .. }
                | Error::Io { .. }
                | Error::CacheMismatch(_)
        )
    }
}

/// Attach a context string to an error.
pub trait Context<T> {
    fn context<C: fmt::Display>(self, ctx: C) -> Result<T>;
    fn with_context<C: fmt::Display, F: FnOnce() -> C>(self, f: F) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context<C: fmt::Display>(self, ctx: C) -> Result<T> {
        self.map_err(|e| Error::Context {
            context: ctx.to_string(),
            inner: Box::new(e),
        })
    }

    fn with_context<C: fmt::Display, F: FnOnce() -> C>(self, f: F) -> Result<T> {
        self.map_err(|e| Error::Context {
            context: f().to_string(),
            inner: Box::new(e),
        })
    }
}
