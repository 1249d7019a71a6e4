//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong inside the core library.
///
/// Numeric domain violations (zero-norm cosine, non-finite gradients) are
/// deliberately hard errors rather than silently smoothed values: the training
/// loop aborts on them so that a broken configuration cannot masquerade as a
/// converged run.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands (or an operand and an op requirement) disagree on shape.
    ShapeMismatch {
        op: &'static str,
        detail: String,
    },
    /// Cosine similarity was asked for a vector with exactly zero L2 norm.
    ZeroNorm {
        op: &'static str,
    },
    /// `backward` was called on a non-scalar node.
    NonScalarRoot {
        elements: usize,
    },
    /// A rank index fell outside `1..=n_classes`, or two ranks that must
    /// differ were equal.
    InvalidRank {
        detail: String,
    },
    /// A pair-set or batch was structurally unusable (empty positives,
    /// missing negatives, too few ranks, ...).
    InvalidBatch {
        detail: String,
    },
    /// A dataset or generator specification cannot be satisfied.
    InvalidSpec {
        detail: String,
    },
    /// A non-finite value surfaced where a finite one is required
    /// (gradients, losses, generated features).
    NonFinite {
        context: String,
    },
    /// A configuration value is out of range or inconsistent.
    InvalidConfig {
        detail: String,
    },
    /// A runtime invariant the trainer enforces was violated mid-run.
    Invariant {
        detail: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in `{op}`: {detail}")
            }
            Error::ZeroNorm { op } => {
                write!(f, "`{op}` requires non-zero-norm operands")
            }
            Error::NonScalarRoot { elements } => {
                write!(
                    f,
                    "backward requires a scalar root, got a tensor with {elements} elements"
                )
            }
            Error::InvalidRank { detail } => write!(f, "invalid rank: {detail}"),
            Error::InvalidBatch { detail } => write!(f, "invalid batch: {detail}"),
            Error::InvalidSpec { detail } => write!(f, "invalid specification: {detail}"),
            Error::NonFinite { context } => {
                write!(f, "non-finite value encountered in {context}")
            }
            Error::InvalidConfig { detail } => write!(f, "invalid configuration: {detail}"),
            Error::Invariant { detail } => write!(f, "invariant violated: {detail}"),
        }
    }
}

impl core::error::Error for Error {}
