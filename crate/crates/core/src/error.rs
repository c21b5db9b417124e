use thiserror::Error;

use crate::value::CsvType;

/// Errors raised while building schemas and data values.
#[derive(Debug, Error)]
pub enum Error {
    #[error("default of header {name:?} does not conform to type {ty}")]
    NonConformingDefault { name: String, ty: CsvType },

    #[error("at least one header is required")]
    NoHeaders,

    #[error("row {row} has {found} cells but there are {expected} headers")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid settings: {0}")]
    Settings(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
