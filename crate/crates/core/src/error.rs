use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the domain of the operation (negative variance,
    /// non-positive distance, non-finite matrix entry, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent dimensions between channels, parameters and matrices.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A closed form produced something that cannot be right, e.g. a
    /// distortion covariance with a clearly negative eigenvalue.
    #[error("numerical consistency: {0}")]
    Numerical(String),

    /// Invalid configuration; the message names the offending key.
    #[error("config: {0}")]
    Config(String),

    /// A sweep cell failed; carries the grid coordinate.
    #[error("realization {realization}, alpha {alpha}, rho {rho}: {source}")]
    Cell {
        realization: u64,
        alpha: f64,
        rho: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
