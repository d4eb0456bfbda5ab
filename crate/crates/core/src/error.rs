use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is outside its admissible range.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The spectrum has an eigenvalue above one, so no DPP exists.
    #[error("spectrum is not in [0,1]: alpha_{ell} = {alpha}")]
    NotADpp { ell: usize, alpha: f64 },

    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerical breakdown: degenerate rejection sampler, insufficient truncation, ...
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
