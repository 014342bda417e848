use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("bistatic bisector is undefined for a forward-scatter (beta = pi) geometry")]
    BisectorUndefined,

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("division by zero-magnitude {what} at index {index}")]
    ZeroDivisor { what: &'static str, index: usize },

    #[error("time gate [{start_s:e}, {stop_s:e}] s lies outside the unambiguous span [0, {span_s:e}) s")]
    GateOutOfRange { start_s: f64, stop_s: f64, span_s: f64 },

    #[error("stop-and-go approximation violated: {0}")]
    StopAndGo(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
