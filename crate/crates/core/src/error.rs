use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cholesky factorization failed for every jitter in the schedule (last tried {last_jitter:e})")]
    FactorizationFailed { last_jitter: f64 },
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {err:e})")]
    QuadNonConvergent { a: f64, b: f64, err: f64 },
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("active set is empty")]
    EmptyActiveSet,
    #[error("could only select {found} of {requested} codewords")]
    CapacityExceeded { requested: usize, found: usize },
    #[error("unsupported smoothness: floor(beta) = {0} > 3")]
    UnsupportedSmoothness(u32),
    #[error("no regularisation value meets the sup-norm constraint eps = {eps}")]
    Infeasible { eps: f64 },
    #[error("event too rare: 0 of {draws} draws fell in the small ball")]
    EventTooRare { draws: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
