use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mantissa width {0} is below the 53-bit minimum")]
    InvalidPrecision(u32),

    #[error("could not parse {0:?} as a scalar")]
    Parse(String),

    /// The iterate coincides with the target (within the termination threshold).
    #[error("iterate reached the target")]
    Termination,

    #[error("Frank-Wolfe direction is degenerate (|x - v| below threshold)")]
    DegenerateDirection,

    #[error("state (r = {r}, s = {s}) lies outside {domain}")]
    DomainViolation { domain: &'static str, r: String, s: String },

    #[error("negative radicand {0} beyond slack")]
    NegativeRadicand(String),

    #[error("{what} = {value} outside its admissible range")]
    OutOfRange { what: &'static str, value: String },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("starting point is infeasible (constraint value {0})")]
    Infeasible(String),

    #[error("stepsize schedule has {got} entries, horizon needs {needed}")]
    ScheduleTooShort { needed: usize, got: usize },

    #[error("backward construction left the domain at step {step}: {source}")]
    Construction {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
