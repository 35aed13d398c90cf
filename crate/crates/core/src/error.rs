use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis dimension overflow for k={k}, n={n}")]
    Overflow { k: usize, n: usize },
    #[error("mode-count mismatch: expected k={expected}, got k={got}")]
    ModeMismatch { expected: usize, got: usize },
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("generator index {index} out of range 1..={k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("polynomial is not symmetric; offending terms: {terms}")]
    NonSymmetric { terms: String },
    #[error("sequence expression failed at n={n}: {msg}")]
    Eval { n: usize, msg: String },
    #[error("zero off-diagonal coupling b_{index}; split the operator into direct summands")]
    ZeroCoupling { index: usize },
    #[error("horizon {given} too small; at least {required} required")]
    HorizonTooSmall { given: usize, required: usize },
    #[error("smoothness shift is {shift}, this check requires shift 1")]
    ShiftNotOne { shift: usize },
    #[error("operator is not hermitian")]
    NotHermitian,
    #[error("operator is not positive: truncation at degree {degree} has eigenvalue {eigenvalue:e}")]
    NotPositive { degree: usize, eigenvalue: f64 },
    #[error("refused: {0}")]
    Refused(String),
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
