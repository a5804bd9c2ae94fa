//! Error type shared across the engine.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Structured failure cases for model algebra, derivation, and simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A polynomial operation would produce more terms than the configured
    /// cap. Recursive substitution can grow models exponentially; the budget
    /// turns that into a recoverable error instead of memory exhaustion.
    TermBudgetExceeded {
        /// The configured cap that was in force.
        budget: usize,
        /// A lower bound on the number of terms the operation needed.
        required: usize,
    },
    /// A Hermite or moment computation was requested above the degree
    /// representable in `f64` factorial arithmetic.
    DegreeOverflow {
        /// The requested degree.
        degree: u32,
        /// The largest supported degree.
        max: u32,
    },
    /// `derive_exact` was called on a model outside the restricted class it
    /// supports (products of inputs and noise, plus purely linear output
    /// terms).
    NotSimplifiedClass {
        /// Human-readable description of the offending term.
        detail: String,
    },
    /// A simulation produced a non-finite value (the model diverged).
    NonFinite {
        /// Sample index at which the first non-finite value appeared.
        index: usize,
    },
    /// Two buffers that must agree in length did not.
    LengthMismatch { expected: usize, actual: usize },
    /// Model construction violated a structural rule (for example an output
    /// or noise reference at lag 0, or a non-finite coefficient).
    InvalidModel {
        /// Human-readable description of the violation.
        detail: String,
    },
    /// A cooperative cancellation flag was raised during a long derivation.
    Cancelled,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TermBudgetExceeded { budget, required } => write!(
                f,
                "term budget exceeded: operation needs at least {required} terms, cap is {budget}"
            ),
            Error::DegreeOverflow { degree, max } => {
                write!(f, "degree {degree} exceeds the supported maximum {max}")
            }
            Error::NotSimplifiedClass { detail } => {
                write!(f, "model is outside the exactly solvable class: {detail}")
            }
            Error::NonFinite { index } => {
                write!(f, "simulation diverged: non-finite value at sample {index}")
            }
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::InvalidModel { detail } => write!(f, "invalid model: {detail}"),
            Error::Cancelled => write!(f, "operation cancelled"),
        }
    }
}

impl core::error::Error for Error {}
