use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("decomposition failed: {reason} (offending eigenvalue {eigenvalue:e})")]
    Decomposition { reason: String, eigenvalue: f64 },
    #[error("ill-conditioned: condition number {condition:e} exceeds {limit:e}")]
    Conditioning { condition: f64, limit: f64 },
    #[error("inconsistent section data: {0}")]
    Consistency(String),
    #[error("support leakage: {0}")]
    Support(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("right-hand side is incompatible: pairing with cokernel element {index} is {pairing:e}")]
    Compatibility { index: usize, pairing: f64 },
    #[error("indeterminate rank: kept/dropped singular value gap {gap:e} below {required:e}; increase the band")]
    IndeterminateRank { gap: f64, required: f64 },
    #[error("formal adjoint residual {residual:e} above tolerance {tolerance:e}")]
    AdjointResidual { residual: f64, tolerance: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("divergent tail integral ({variant})")]
    DivergentTail { variant: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
