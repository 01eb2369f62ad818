use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse {what} from `{input}`: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("matrix of dimension {dim} needs {bytes} bytes, above the cap of {cap} bytes")]
    MemoryCap { dim: usize, bytes: u128, cap: u128 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("spectral parameter z = {re}{im:+}i lies outside the region |Im z| >= {eta}")]
    OutsideLambda { re: f64, im: f64, eta: f64 },

    #[error("singular pivot at row {row} in {what}")]
    Singular { what: &'static str, row: usize },

    #[error("self-check failed: {what} = {value:e} exceeds {bound:e}")]
    CheckFailed {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
