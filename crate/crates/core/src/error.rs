use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {theta} rad outside model domain [0, {theta_max}]")]
    Domain { theta: f64, theta_max: f64 },

    #[error("no root: radius {rho} px exceeds maximum {rho_max} px")]
    NoRoot { rho: f64, rho_max: f64 },

    #[error("radial polynomial is not strictly increasing on [0, {theta_max}] (derivative {slope} at {at})")]
    NonMonotone { theta_max: f64, at: f64, slope: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid robust loss scale c = {0} (must be > 0)")]
    InvalidScale(f64),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("at least one source map is required")]
    EmptySource,

    #[error("posteriors at pixel {pixel} sum to {sum}, expected 1")]
    Normalization { pixel: usize, sum: f64 },

    #[error("uncertainty parameter must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("value {value} out of range: {what}")]
    OutOfRange { what: String, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::SizeMismatch(msg.into())
    }
}
