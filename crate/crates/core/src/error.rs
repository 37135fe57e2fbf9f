use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The CLI maps [`Error::exit_code`] onto process exit codes: validation-type
/// errors exit with 1, numeric failures with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite {term} at index {index}")]
    NonFinite { term: &'static str, index: usize },

    #[error("stiffness failure at t = {t}: {halvings} consecutive step halvings")]
    Stiffness {
        t: f64,
        halvings: u32,
        /// Density and velocity of the last accepted state.
        last_state: Box<crate::solver::FluidState>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Checkpoint(_) => 1,
            Error::Io(_) | Error::Csv(_) => 1,
            Error::Numeric(_) | Error::NonFinite { .. } | Error::Stiffness { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
