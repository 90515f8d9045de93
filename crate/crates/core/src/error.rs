//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// Bloch parameters or a raw matrix fail positive-semidefiniteness.
    #[error("parameters do not describe a physical state (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),

    /// A matrix fails Hermiticity or unit-trace validation.
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    /// Operator or vector dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A basis or labeling argument is malformed.
    #[error("invalid measurement description: {0}")]
    InvalidBasis(String),

    /// The identical-states flag was set but the singular triples differ.
    #[error("identical flag set but the three singular triples differ")]
    IdenticalFlagMismatch,

    /// No grid point satisfies the feasibility predicate.
    #[error("no feasible grid point for the optimization problem")]
    InfeasibleProblem,

    /// A numerically verified threshold disagrees with its closed form.
    #[error("threshold verification failed for {kind}: analytic {analytic:.6}, numeric {numeric:.6}")]
    VerificationFailure {
        kind: String,
        analytic: f64,
        numeric: f64,
    },

    /// A protocol configuration is unusable.
    #[error("invalid protocol config: {0}")]
    Config(String),

    /// Too few sifted rounds to estimate the error rate.
    #[error("insufficient statistics: only {0} sifted rounds (need at least 100)")]
    InsufficientStatistics(usize),

    /// Sifted key lengths disagree.
    #[error("key length mismatch: hub holds {hub} blocks, edge key {link} holds {edge} bits")]
    LengthMismatch { hub: usize, link: usize, edge: usize },

    /// A JSON state descriptor could not be realized.
    #[error("invalid state descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
