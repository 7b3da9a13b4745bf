use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// A sample point in coordinate space, kept for error reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<Complex64>);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, z) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            if z.im == 0.0 {
                write!(f, "{}", z.re)?;
            } else {
                write!(f, "{}{:+}i", z.re, z.im)?;
            }
        }
        write!(f, ")")
    }
}

impl From<&[Complex64]> for Point {
    fn from(p: &[Complex64]) -> Self {
        Point(p.to_vec())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("variable index {index} out of range for dimension {dim}")]
    Arity { index: usize, dim: usize },

    #[error("domain error: {what}")]
    Domain { what: String },

    #[error("degenerate metric at {point}: |det| = {det:e}")]
    DegenerateMetric { point: Point, det: f64 },

    #[error("degenerate pencil member λ = ({}, {}) at {point}: |det| = {det:e}", .lambda.0, .lambda.1)]
    DegeneratePencil {
        lambda: (Complex64, Complex64),
        point: Point,
        det: f64,
    },

    #[error("root finding did not converge after {iterations} iterations")]
    RootFindingFailure { iterations: usize },

    #[error("singular integral operator at s = {s}: condition estimate {condition:e}")]
    SingularOperator { s: f64, condition: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
