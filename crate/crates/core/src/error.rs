use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("site index {site} out of range for a chain of {len} spins")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("configuration {state:#x} does not fit in {len} spins")]
    StateOutOfRange { state: u64, len: usize },

    #[error("system size L = {len} exceeds the full-basis limit of {max}")]
    TooLarge { len: usize, max: usize },

    #[error("invalid amplitude table: {0}")]
    InvalidTable(String),

    #[error("amplitude overflow: {0}")]
    Overflow(String),

    #[error("local energy undefined at state {state:#x}: trial amplitude is zero")]
    ZeroAmplitude { state: u64 },

    #[error("negative Green's function weight {weight} at state {state:#x} (lambda shift too small?)")]
    NegativeWeight { state: u64, weight: f64 },

    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:e}, tol {tol:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("invalid GFMC configuration: {0}")]
    InvalidGfmc(String),

    #[error("chain record too short: {len} steps, need more than {needed}")]
    RecordTooShort { len: usize, needed: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
