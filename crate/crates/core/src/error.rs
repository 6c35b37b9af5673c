use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid multi-index {0:?}: axes must be strictly increasing and below the dimension")]
    InvalidMultiIndex(Vec<usize>),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("incompatible ambient spaces: {0}")]
    AmbientMismatch(String),
    #[error("mode {mode:?} exceeds truncation radius {radius}")]
    TruncationOverflow { mode: Vec<i32>, radius: usize },
    #[error("invalid flux: {0}")]
    FluxInvalid(String),
    #[error("flux is not closed (|dH| = {0:e})")]
    FluxNotClosed(f64),
    #[error("operation requires a constant (translation-invariant) flux")]
    NonConstantFlux,
    #[error("formula adjoint and Gram adjoint differ by {0:e}")]
    AdjointMismatch(f64),
    #[error("eigenvalue {value:e} of block {mode:?} lies in the kernel guard band (threshold {threshold:e})")]
    AmbiguousKernel {
        mode: Vec<i32>,
        value: f64,
        threshold: f64,
    },
    #[error("rescaling parameter must be nonzero")]
    ZeroLambda,
    #[error("operation requires an even-dimensional torus, got dimension {0}")]
    OddDimension(usize),
    #[error("operation requires an odd-dimensional torus, got dimension {0}")]
    EvenDimension(usize),
    #[error("hermitian form is degenerate (smallest |eigenvalue| {0:e})")]
    DegenerateForm(f64),
    #[error("form matrix is not hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("involution does not preserve the harmonic space (defect {0:e})")]
    TauNotPreserving(f64),
    #[error("no spectral symmetry detected: {0}")]
    SymmetryNotDetected(String),
    #[error("leading symbol is not balanced: {0}")]
    UnbalancedSymbol(String),
    #[error("eigenvalue tracking ambiguous at u = {u}: overlap {overlap:.3} below threshold")]
    TrackingAmbiguity { u: f64, overlap: f64 },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("signature identity violated: {0}")]
    IdentityViolated(String),
    #[error("heat trace tail {tail:e} too large, need truncation radius {required_radius}")]
    TailTooLarge { tail: f64, required_radius: usize },
    #[error("least-squares design matrix condition {0:e} too large")]
    IllConditionedFit(f64),
    #[error("supertrace not constant across the grid (spread {0:e})")]
    ConstancyViolated(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
