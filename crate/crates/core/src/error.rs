use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension {0}: the point interaction is only defined for N in {{2, 3}}")]
    Dimension(i64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("states live on different grids")]
    GridMismatch,

    #[error("states use different spectral shifts ({0} vs {1}); change lambda first")]
    LambdaMismatch(f64, f64),

    #[error("charge term not coercive: lambda = {lambda} must exceed omega_alpha = {omega_alpha}")]
    NotCoercive { lambda: f64, omega_alpha: f64 },

    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),

    #[error("shooting failed: {message}; scan trace: {trace:?}")]
    Shooting { message: String, trace: Vec<(f64, String)> },

    #[error("mountain pass endpoint not found (I(z) >= 0 for every dilation up to T = {t_max})")]
    EndpointNotFound { t_max: f64 },

    #[error("newton refinement failed: {message}; residual history: {history:?}")]
    Newton { message: String, history: Vec<f64> },

    #[error("singular linear system")]
    Singular,

    #[error("diagnostic unavailable: {0}")]
    Unavailable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
