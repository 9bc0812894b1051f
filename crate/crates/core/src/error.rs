use thiserror::Error;

/// Which kind of slot an expression referenced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    State,
    Coeff,
}

impl std::fmt::Display for SlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SlotKind::State => f.write_str("state"),
            SlotKind::Coeff => f.write_str("coefficient"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("{kind} slot {slot} is out of range (only {available} supplied)")]
    SlotOutOfRange {
        kind: SlotKind,
        slot: usize,
        available: usize,
    },
    #[error("Lagrangian references acceleration slot {slot}")]
    AccelerationInLagrangian { slot: usize },
    #[error("state slot {slot} is outside the layout ({slots} slots)")]
    BadVariable { slot: usize, slots: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unexpected character {found:?} at byte {pos}")]
    UnexpectedChar { found: char, pos: usize },
    #[error("unexpected token {found:?} at byte {pos}, expected {expected}")]
    UnexpectedToken {
        found: String,
        pos: usize,
        expected: &'static str,
    },
    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
    #[error("invalid number {text:?} at byte {pos}")]
    BadNumber { text: String, pos: usize },
    #[error("variable {name:?} at byte {pos} does not exist in this layout")]
    UnknownVariable { name: String, pos: usize },
}

/// Numeric-domain failure recorded by the tape.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{op}: operand {value} outside the function's domain")]
pub struct DomainError {
    pub op: &'static str,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid pendulum parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint block {block:?}: {message}")]
    Block { block: String, message: String },
}
