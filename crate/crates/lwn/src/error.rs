//! Crate-wide error types.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (bad layer sizes, out-of-range knobs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor/vector shape disagreement.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation was called with its precondition unmet.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Dataset-level problem (count mismatches, unknown categories, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A single cell of a tabular file could not be parsed.
    #[error("parse error at row {row}, column {col}: {message}")]
    Cell {
        row: usize,
        col: usize,
        message: String,
    },

    /// `freeze` found a weight that is not exactly in {-1, 0, +1}.
    #[error("non-discrete weight {value} at layer {layer}, row {row}, col {col}")]
    NonDiscreteWeight {
        layer: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    /// Training produced a non-finite loss. Carries the last finite state.
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        state: Box<crate::trainer::TrainState>,
    },

    /// Model file codec failure.
    #[error("model format error: {0}")]
    Format(#[from] FormatError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Decode failures for the on-disk model and cache formats.
///
/// Each corruption class gets its own variant so callers (and tests) can
/// tell them apart.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("layer {layer}: decoded {decoded} symbols from {bits} bits, expected {expected}")]
    SymbolCount {
        layer: usize,
        expected: usize,
        decoded: usize,
        bits: u64,
    },

    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

impl Error {
    /// Process exit code for the CLI: 0 success, 2 config, 3 io, 4 exhausted
    /// (mapped elsewhere), 5 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Contract(_) => 2,
            Error::Io(_) => 3,
            Error::Data(_)
            | Error::Cell { .. }
            | Error::NonDiscreteWeight { .. }
            | Error::Diverged { .. }
            | Error::Format(_) => 5,
        }
    }
}
