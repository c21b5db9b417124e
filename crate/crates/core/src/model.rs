//! Settings, headers, loaded data and located errors.

use std::fmt;
use std::sync::Arc;

use crate::error::Error;
use crate::invariants::{CellInvariant, ColumnInvariant};
use crate::value::{CsvType, CsvValue, Matrix};

/// CSV dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSettings {
    pub delimiter: char,
    pub quote: char,
    pub line_comment: Option<char>,
    pub skip_blank_lines: bool,
    pub trim_unquoted: bool,
}

impl Default for CsvSettings {
    fn default() -> Self {
        CsvSettings {
            delimiter: ',',
            quote: '"',
            line_comment: None,
            skip_blank_lines: true,
            trim_unquoted: true,
        }
    }
}

impl CsvSettings {
    /// Checks that the dialect characters are usable together.
    ///
    /// All three must be ASCII and not line breaks; the quote and comment
    /// characters may not be spaces or tabs, and no two may coincide.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |what: &str, why: &str| Err(Error::Settings(format!("{what} {why}")));
        let mut chars = vec![("delimiter", self.delimiter), ("quote", self.quote)];
        if let Some(c) = self.line_comment {
            chars.push(("comment", c));
        }
        for &(what, c) in &chars {
            if !c.is_ascii() {
                return bad(what, &format!("{c:?} must be an ASCII character"));
            }
            if c == '\n' || c == '\r' {
                return bad(what, "may not be a line break");
            }
            if what != "delimiter" && (c == ' ' || c == '\t') {
                return bad(what, "may not be a space or tab");
            }
        }
        if self.delimiter == self.quote {
            return bad("delimiter", "must differ from the quote character");
        }
        if let Some(c) = self.line_comment {
            if c == self.delimiter || c == self.quote {
                return bad("comment", "must differ from the delimiter and the quote character");
            }
        }
        Ok(())
    }

    /// Whitespace that blank-line detection and trimming ignore.
    pub fn is_blank(&self, c: char) -> bool {
        (c == ' ' || c == '\t') && c != self.delimiter
    }
}

/// Per-column declaration.
#[derive(Clone)]
pub struct Header {
    name: String,
    ty: CsvType,
    default: CsvValue,
    description: Option<String>,
    cell_inv: Option<Arc<dyn CellInvariant>>,
    col_inv: Option<Arc<dyn ColumnInvariant>>,
}

impl Header {
    /// Fails when `default` does not conform to `ty`.
    pub fn new(name: impl Into<String>, ty: CsvType, default: CsvValue) -> Result<Header, Error> {
        let name = name.into();
        if !default.conforms_to(ty) {
            return Err(Error::NonConformingDefault { name, ty });
        }
        Ok(Header {
            name,
            ty,
            default,
            description: None,
            cell_inv: None,
            col_inv: None,
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn with_cell_inv(mut self, inv: Arc<dyn CellInvariant>) -> Self {
        self.cell_inv = Some(inv);
        self
    }

    pub fn with_col_inv(mut self, inv: Arc<dyn ColumnInvariant>) -> Self {
        self.col_inv = Some(inv);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn ty(&self) -> CsvType {
        self.ty
    }

    pub fn default_value(&self) -> &CsvValue {
        &self.default
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn cell_inv(&self) -> Option<&Arc<dyn CellInvariant>> {
        self.cell_inv.as_ref()
    }

    pub fn col_inv(&self) -> Option<&Arc<dyn ColumnInvariant>> {
        self.col_inv.as_ref()
    }

    /// The same declaration with both invariants removed.
    pub fn without_invariants(&self) -> Header {
        Header {
            cell_inv: None,
            col_inv: None,
            ..self.clone()
        }
    }
}

impl fmt::Debug for Header {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Header")
            .field("name", &self.name)
            .field("ty", &self.ty)
            .field("default", &self.default)
            .field("description", &self.description)
            .field("cell_inv", &self.cell_inv.is_some())
            .field("col_inv", &self.col_inv.is_some())
            .finish()
    }
}

/// Non-empty, ordered column declarations. Column `c` (1-based) is
/// `headers[c - 1]`.
#[derive(Debug, Clone)]
pub struct Headers(Vec<Header>);

impl Headers {
    pub fn new(headers: Vec<Header>) -> Result<Headers, Error> {
        if headers.is_empty() {
            return Err(Error::NoHeaders);
        }
        Ok(Headers(headers))
    }

    /// Headers with placeholder names `column1..`, canonical defaults and
    /// no invariants.
    pub fn simple(types: &[CsvType]) -> Result<Headers, Error> {
        let headers = types
            .iter()
            .enumerate()
            .map(|(i, &ty)| Header::new(format!("column{}", i + 1), ty, ty.canonical_default()))
            .collect::<Result<Vec<_>, _>>()?;
        Headers::new(headers)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Header> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Header] {
        &self.0
    }

    pub fn get_mut(&mut self, index: usize) -> Option<&mut Header> {
        self.0.get_mut(index)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.iter().map(Header::name).collect()
    }

    pub fn without_invariants(&self) -> Headers {
        Headers(self.0.iter().map(Header::without_invariants).collect())
    }
}

impl std::ops::Index<usize> for Headers {
    type Output = Header;

    fn index(&self, index: usize) -> &Header {
        &self.0[index]
    }
}

impl<'a> IntoIterator for &'a Headers {
    type Item = &'a Header;
    type IntoIter = std::slice::Iter<'a, Header>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A loaded CSV document.
///
/// Every row has exactly one cell per header. Each row also remembers its
/// 1-based data-row number in the source file, so that errors found after
/// structurally broken rows were dropped still point at the right line.
#[derive(Debug, Clone)]
pub struct Data {
    settings: CsvSettings,
    headers: Headers,
    matrix: Matrix,
    row_numbers: Vec<usize>,
}

impl Data {
    /// Rows are numbered `1..=matrix.len()`.
    pub fn new(settings: CsvSettings, headers: Headers, matrix: Matrix) -> Result<Data, Error> {
        let row_numbers = (1..=matrix.len()).collect();
        Data::with_row_numbers(settings, headers, matrix, row_numbers)
    }

    pub fn with_row_numbers(
        settings: CsvSettings,
        headers: Headers,
        matrix: Matrix,
        row_numbers: Vec<usize>,
    ) -> Result<Data, Error> {
        if let Some((i, row)) = matrix
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != headers.len())
        {
            return Err(Error::RaggedRow {
                row: i + 1,
                expected: headers.len(),
                found: row.len(),
            });
        }
        assert_eq!(matrix.len(), row_numbers.len(), "one row number per row");
        assert!(row_numbers.iter().all(|&n| n >= 1), "row numbers are 1-based");
        Ok(Data {
            settings,
            headers,
            matrix,
            row_numbers,
        })
    }

    pub fn empty(settings: CsvSettings, headers: Headers) -> Data {
        Data {
            settings,
            headers,
            matrix: Vec::new(),
            row_numbers: Vec::new(),
        }
    }

    pub fn settings(&self) -> &CsvSettings {
        &self.settings
    }

    pub fn headers(&self) -> &Headers {
        &self.headers
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Source data-row number of each matrix row.
    pub fn row_numbers(&self) -> &[usize] {
        &self.row_numbers
    }

    pub fn row_count(&self) -> usize {
        self.matrix.len()
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Same settings and headers, no rows.
    pub fn emptied(&self) -> Data {
        Data::empty(self.settings.clone(), self.headers.clone())
    }
}

/// A located failure: 1-based data row (header line excluded), 1-based
/// column, and the reason.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CsvError {
    pub row_no: usize,
    pub col_no: usize,
    pub reason: String,
}

impl CsvError {
    pub fn new(row_no: usize, col_no: usize, reason: impl Into<String>) -> CsvError {
        let reason = reason.into();
        assert!(row_no >= 1 && col_no >= 1, "error positions are 1-based");
        assert!(!reason.is_empty(), "error reasons are non-empty");
        CsvError {
            row_no,
            col_no,
            reason,
        }
    }
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}): \"{}\"", self.row_no, self.col_no, self.reason)
    }
}
