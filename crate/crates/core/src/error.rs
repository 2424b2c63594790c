use thiserror::Error;

use crate::circuit::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("half-exponent parity mismatch ({left} vs {right})")]
    ParityMismatch { left: u32, right: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid circuit: {}", join(.0))]
    Invalid(Vec<ValidationError>),

    #[error("quantum op on classical register: qubit {qubit} (op {op})")]
    ClassicalRegister { op: usize, qubit: usize },

    #[error("invalid postselection: projected mass is zero (op {op})")]
    InvalidPostselection { op: usize },

    #[error("invalid correlated measurement: no valid output (op {op})")]
    InvalidCorrelatedMeasurement { op: usize },

    #[error("zero-probability conditioning event (op {op})")]
    ZeroConditioning { op: usize },

    #[error("sampler integrity error: partitions force contradictory bits (op {op}, bit {bit})")]
    Integrity { op: usize, bit: usize },

    #[error("input length mismatch: expected {expected} bits, got {got}")]
    InputLength { expected: usize, got: usize },

    #[error("resource limit exceeded: {0}")]
    Limit(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Domain(String),
}

fn join(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Tags an op-scoped error with the op index it occurred at.
    pub fn at_op(mut self, index: usize) -> Error {
        match &mut self {
            Error::ClassicalRegister { op, .. }
            | Error::InvalidPostselection { op }
            | Error::InvalidCorrelatedMeasurement { op }
            | Error::ZeroConditioning { op }
            | Error::Integrity { op, .. } => *op = index,
            _ => {}
        }
        self
    }

    /// Errors caused by malformed input text or arguments rather than by the
    /// semantics of a well-formed object.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Syntax { .. } | Error::Invalid(_) | Error::InputLength { .. }
        )
    }
}
