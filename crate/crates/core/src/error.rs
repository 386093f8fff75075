use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("SINR must be nonnegative, got {0}")]
    NegativeSinr(f64),

    #[error("performance value {value} is outside the range of the metric (supremum {sup})")]
    OutOfRange { value: f64, sup: f64 },

    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: usize },

    #[error("finite-difference step {0} is too small for double precision")]
    StepTooSmall(f64),

    #[error("Strategy 1 produced {0}")]
    Strategy1Failed(&'static str),

    #[error("dual normalization mismatch: sum(mu) = {mu_sum:.6}, sum(lambda) = {lambda_sum:.6} after rescaling")]
    DualNormalization { mu_sum: f64, lambda_sum: f64 },

    #[error("conic solver failure: {0}")]
    Solver(String),

    #[error("scenario fingerprints differ: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
