use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid `{key}`: {msg}")]
    Invalid { key: String, msg: String },

    #[error("trail of LED {led} exceeds the sensor bounds")]
    OutOfBounds { led: usize },

    #[error("no trail rendered")]
    EmptyTrail,

    #[error("operating point saturated (I = {photons:.6e} photons)")]
    Saturated { photons: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
