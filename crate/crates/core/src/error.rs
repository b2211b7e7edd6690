use thiserror::Error;

/// Errors raised by precondition checks across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index or size parameter is out of its admissible range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Permutation size does not match the measure's size.
    #[error("size mismatch: permutation has {found} entries, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },

    /// The input does not encode a bijection of {1..N}.
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    /// A functional-equation constraint was not satisfied by the arguments.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// A series or product did not reach its tolerance within the term budget.
    #[error("no convergence after {terms} terms (tail bound {tail:e})")]
    NotConverged { terms: usize, tail: f64 },

    /// A q-Pochhammer product that is identically zero was requested in log space.
    #[error("divergent: {0}")]
    Divergent(String),

    /// The brute-force oracle refuses problem sizes with factorial blowup.
    #[error("brute-force enumeration refused for N = {0} (limit 9)")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn out_of_range(msg: impl Into<String>) -> Error {
    Error::OutOfRange(msg.into())
}
