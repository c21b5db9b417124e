//! Schema-driven CSV loading and validation.
//!
//! Files are read through a pluggable [`backend::ParserBackend`], typed
//! against [`Headers`] that carry a type and a default per column, and
//! checked against invariants at four levels: cell, row, column and file.
//! Every failure is a [`CsvError`] located by data row and column.
//!
//! Two entry points are offered: the low-level calls in [`io`] and the
//! stateful [`Session`].

pub mod backend;
pub mod bench;
pub mod error;
pub mod invariants;
pub mod io;
pub mod model;
pub mod report;
pub mod schema;
pub mod session;
pub mod value;

pub use backend::{BackendKind, FastParser, NativeParser, ParserBackend, RawField, RawRow};
pub use error::Error;
pub use invariants::{csv_invariants_failed, InvariantSuite};
pub use io::{file_status, CsvIo, FileStatus, ReadOutcome};
pub use model::{CsvError, CsvSettings, Data, Header, Headers};
pub use report::render_report;
pub use schema::{parse_schema, SchemaDocument, SchemaError};
pub use session::Session;
pub use value::{approx_eq, parse_cell, CsvType, CsvValue, Matrix, Reason, Row, TransposedRow};
