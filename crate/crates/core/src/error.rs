use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    /// `line` is 0 for overrides and missing keys.
    #[error("config error{}: key `{key}`: {msg}", at_line(*line))]
    Config { key: String, line: usize, msg: String },

    #[error("parameter validation failed: {0}")]
    Validation(String),

    #[error("numerical failure at t = {time}: {msg}")]
    Numerical { time: f64, msg: String },

    #[error("contraction guard violated: measured factor {factor:.6e} >= threshold {threshold}")]
    Guard { factor: f64, threshold: f64 },

    #[error("neumann series did not converge in {terms} terms (last term norm {last:.3e})")]
    NonConvergence { terms: usize, last: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

impl Error {
    /// Process exit status associated with the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Validation(_) | Error::Argument(_) => 2,
            Error::Numerical { .. } | Error::NonConvergence { .. } | Error::Internal(_) => 3,
            Error::Guard { .. } => 4,
            Error::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Config { .. } => "config",
            Error::Validation(_) => "validation",
            Error::Numerical { .. } => "numerical",
            Error::Guard { .. } => "guard",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}
