use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Relay placed on top of the source or the destination.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Path-loss exponent at or below 2: interference and C are infinite.
    #[error("divergent interference for alpha = {alpha} (alpha must exceed 2)")]
    Divergence { alpha: f64 },

    /// Adaptive quadrature ran out of budget before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e} after {evaluations} evaluations")]
    Accuracy {
        estimate: f64,
        error_bound: f64,
        evaluations: usize,
    },

    /// A formula that should produce a probability landed outside [0, 1].
    #[error("probability {value} outside [0, 1] beyond tolerance in {context}")]
    OutOfRange { value: f64, context: &'static str },

    #[error("target not reachable inside the search bracket: {0}")]
    BracketExhausted(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
