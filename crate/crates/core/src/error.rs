use thiserror::Error;

/// Errors raised by constructions and verifications in this crate.
///
/// Variants are grouped loosely by the module that raises them; the CLI and the
/// C ABI map them onto exit/status codes through [`Error::is_validation`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // numerics
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    // algebra
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("map is not a unital *-homomorphism: {0}")]
    NotStarHom(String),
    #[error("functional is not a state: {0}")]
    NotState(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    // cpmaps
    #[error("map is not completely positive: {0}")]
    NotCp(String),
    #[error("map is not unital (residual {residual:.3e})")]
    NotUnital { residual: f64 },
    #[error("transfer operator check failed: {0}")]
    TransferInvalid(String),
    #[error("expectation value leaves the range of the endomorphism (residual {residual:.3e})")]
    RangeNotInImage { residual: f64 },
    #[error("endomorphism is not injective (rank {rank} of {dim})")]
    NotInjective { rank: usize, dim: usize },

    // tower
    #[error("depth budget exceeded: {0}")]
    DepthExceeded(String),
    #[error("transfer operator needs depth at least 1")]
    DepthZero,
    #[error("size cap exceeded: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },

    // covariant
    #[error("operator is not a contraction (norm {norm:.6})")]
    NotContraction { norm: f64 },
    #[error("covariance relation fails (residual {residual:.3e})")]
    NotCovariant { residual: f64 },
    #[error("invalid strategy: {0}")]
    StrategyInvalid(String),
    #[error("cyclic vector has norm {norm:.3e}")]
    NullCyclicVector { norm: f64 },
    #[error("subspace is not invariant (leakage {leakage:.3e})")]
    InvarianceViolation { leakage: f64 },

    // extension / dilation
    #[error("defect decomposition mismatch: {0}")]
    DecompositionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // equivalence
    #[error("spanning set is rank deficient ({rank} < {dim}); minimality fails")]
    SpanDeficient { rank: usize, dim: usize },
    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    // workbench
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed at gate '{gate}': {detail}")]
    Validation { gate: String, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(gate: &str, detail: impl Into<String>) -> Self {
        Error::Validation {
            gate: gate.to_string(),
            detail: detail.into(),
        }
    }

    /// Whether the error stems from bad input rather than a failed construction.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
