use pclab_linalg::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite values at step {step}")]
    Divergence { step: usize },
    #[error("dense Hessian with {rows} rows exceeds the cap of {cap}")]
    ResourceCap { rows: usize, cap: usize },
    #[error("degenerate quantity: {0}")]
    Degenerate(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PcError>;
