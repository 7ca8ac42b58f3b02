//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Market or model parameters violate a construction invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Grid violates the explicit-scheme stability bound dtheta/dz^2 <= 0.5.
    #[error("grid stability violated: dtheta/dz^2 = {ratio} exceeds {limit}")]
    Unstable { ratio: f64, limit: f64 },

    /// An evaluation was requested outside the operation's domain.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A quantity required to be invertible/nonzero was singular.
    #[error("singular: {0}")]
    Singular(String),

    /// NaN, overflow, or a failed numerical consistency check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested operation has no defined result for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// CLI / config-file problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-parsable category tag, used by the CLI's one-line
    /// error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "params",
            Error::Unstable { .. } => "stability",
            Error::Domain(_) => "domain",
            Error::Singular(_) => "singular",
            Error::Numerical(_) => "numerical",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
