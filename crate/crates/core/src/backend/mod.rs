//! Pluggable low-level CSV parsers.
//!
//! A backend turns a byte stream into a stream of raw rows under a
//! [`CsvSettings`] dialect. It knows nothing about headers or types: a
//! header line is simply the first row it yields.
//!
//! Dialect rules shared by every backend:
//!
//! - A leading UTF-8 byte-order mark is skipped. Input must be UTF-8.
//! - CRLF, LF and lone CR all end a record; a final terminator does not
//!   produce an extra empty row.
//! - A field whose first non-blank character is the quote character is
//!   quoted: it runs to the matching closing quote, may contain delimiters
//!   and line breaks, and a doubled quote stands for one quote. Blanks
//!   before the opening quote are dropped; after the closing quote, blanks
//!   are dropped and any other characters up to the next delimiter are
//!   appended verbatim.
//! - Unquoted fields run to the next delimiter or line break and are
//!   trimmed of blanks when `trim_unquoted` is set.
//! - Outside quotes, a record whose first non-blank character is the
//!   comment character is skipped up to its line break, and a record made
//!   only of blanks is skipped when `skip_blank_lines` is set (otherwise it
//!   is a single unquoted field).
//!
//! "Blank" means space or tab, unless that character is the delimiter.

mod fast;
mod native;

use std::fmt;
use std::io::Read;
use std::str::FromStr;

pub use fast::FastParser;
pub use native::NativeParser;

use crate::model::CsvSettings;
use crate::value::Reason;

/// One field as read from the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawField {
    pub text: String,
    /// Whether the field was written between quotes; a quoted empty
    /// string is not an empty field.
    pub quoted: bool,
}

impl RawField {
    pub fn unquoted(text: impl Into<String>) -> RawField {
        RawField {
            text: text.into(),
            quoted: false,
        }
    }

    pub fn quoted(text: impl Into<String>) -> RawField {
        RawField {
            text: text.into(),
            quoted: true,
        }
    }
}

pub type RawRow = Vec<RawField>;

/// Streaming row iterator borrowed from a backend.
pub type Rows<'a> = Box<dyn Iterator<Item = RawRow> + 'a>;

/// A low-level CSV parser.
///
/// `parse` streams rows; when the input is malformed the iterator stops
/// early and `last_error` describes why, with a 1-based line number.
pub trait ParserBackend: Send {
    fn parse<'a>(&'a mut self, input: Box<dyn Read + 'a>) -> Rows<'a>;

    /// Error of the most recent parse on this instance, if any.
    fn last_error(&self) -> Reason;

    fn clear(&mut self);

    fn settings(&self) -> &CsvSettings;
}

/// Selectable backend implementations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BackendKind {
    #[default]
    Native,
    Fast,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Native => "native",
            BackendKind::Fast => "fast",
        }
    }

    pub fn create(self, settings: CsvSettings) -> Box<dyn ParserBackend> {
        match self {
            BackendKind::Native => Box::new(NativeParser::new(settings)),
            BackendKind::Fast => Box::new(FastParser::new(settings)),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(BackendKind::Native),
            "fast" => Ok(BackendKind::Fast),
            other => Err(format!("unknown parser {other:?} (expected native or fast)")),
        }
    }
}

fn unterminated(line: usize) -> String {
    format!("unterminated quoted field starting at line {line}")
}

fn invalid_utf8(line: usize) -> String {
    format!("invalid UTF-8 at line {line}")
}

fn read_failure(line: usize, err: &std::io::Error) -> String {
    format!("read error at line {line}: {err}")
}

/// Drives a record reader, parking its error in the backend's slot.
struct RowIter<'a, P> {
    reader: P,
    error: &'a mut Option<String>,
    done: bool,
}

trait RecordReader {
    fn next_record(&mut self) -> Result<Option<RawRow>, String>;
}

impl<P: RecordReader> Iterator for RowIter<'_, P> {
    type Item = RawRow;

    fn next(&mut self) -> Option<RawRow> {
        if self.done {
            return None;
        }
        match self.reader.next_record() {
            Ok(Some(row)) => Some(row),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(message) => {
                *self.error = Some(message);
                self.done = true;
                None
            }
        }
    }
}
