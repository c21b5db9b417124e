//! Column types, typed cell values and the pure cell-level operations.

use std::fmt;
use std::hash::{Hash, Hasher};

use num_traits::Float;

/// Outcome of an invariant check: `None` when it holds, otherwise a
/// non-empty explanation.
pub type Reason = Option<String>;

/// Declared type of a CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CsvType {
    String,
    Integer,
    Float,
    Boolean,
}

impl CsvType {
    pub const ALL: [CsvType; 4] = [
        CsvType::String,
        CsvType::Integer,
        CsvType::Float,
        CsvType::Boolean,
    ];

    /// Canonical long name, as used in messages and schema files.
    pub fn name(self) -> &'static str {
        match self {
            CsvType::String => "String",
            CsvType::Integer => "Integer",
            CsvType::Float => "Float",
            CsvType::Boolean => "Boolean",
        }
    }

    /// Accepts the long names and the short aliases `Str`, `Int`, `Bool`.
    pub fn from_name(name: &str) -> Option<CsvType> {
        match name {
            "String" | "Str" => Some(CsvType::String),
            "Integer" | "Int" => Some(CsvType::Integer),
            "Float" => Some(CsvType::Float),
            "Boolean" | "Bool" => Some(CsvType::Boolean),
            _ => None,
        }
    }

    /// Zero value of the type: `""`, `0`, `0.0`, `false`.
    pub fn canonical_default(self) -> CsvValue {
        match self {
            CsvType::String => CsvValue::Text(String::new()),
            CsvType::Integer => CsvValue::Int(0),
            CsvType::Float => CsvValue::Flt(0.0),
            CsvType::Boolean => CsvValue::Bool(false),
        }
    }
}

impl fmt::Display for CsvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A typed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Text(String),
    Int(i64),
    Flt(f64),
    Bool(bool),
}

impl CsvValue {
    pub fn conforms_to(&self, ty: CsvType) -> bool {
        matches!(
            (self, ty),
            (CsvValue::Text(_), CsvType::String)
                | (CsvValue::Int(_), CsvType::Integer)
                | (CsvValue::Flt(_), CsvType::Float)
                | (CsvValue::Bool(_), CsvType::Boolean)
        )
    }

    /// Name of the variant, for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            CsvValue::Text(_) => "Text",
            CsvValue::Int(_) => "Int",
            CsvValue::Flt(_) => "Flt",
            CsvValue::Bool(_) => "Bool",
        }
    }

    /// Numeric view of `Int` and `Flt` cells.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            CsvValue::Int(i) => Some(i as f64),
            CsvValue::Flt(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            CsvValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Serialized cell text: integers in decimal, floats in the shortest
    /// form that parses back to the same double, booleans as `true`/`false`.
    pub fn render(&self) -> String {
        match self {
            CsvValue::Text(s) => s.clone(),
            CsvValue::Int(i) => i.to_string(),
            CsvValue::Flt(x) => format!("{x:?}"),
            CsvValue::Bool(b) => b.to_string(),
        }
    }

    /// Key under which two cells count as the same element of a set.
    pub(crate) fn set_key(&self) -> ValueKey<'_> {
        match self {
            CsvValue::Text(s) => ValueKey::Text(s),
            CsvValue::Int(i) => ValueKey::Int(*i),
            // 0.0 and -0.0 are the same real
            CsvValue::Flt(x) => ValueKey::Flt(if *x == 0.0 { 0 } else { x.to_bits() }),
            CsvValue::Bool(b) => ValueKey::Bool(*b),
        }
    }
}

impl fmt::Display for CsvValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum ValueKey<'a> {
    Text(&'a str),
    Int(i64),
    Flt(u64),
    Bool(bool),
}

impl Hash for ValueKey<'_> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            ValueKey::Text(s) => {
                0u8.hash(state);
                s.hash(state)
            }
            ValueKey::Int(i) => {
                1u8.hash(state);
                i.hash(state)
            }
            ValueKey::Flt(b) => {
                2u8.hash(state);
                b.hash(state)
            }
            ValueKey::Bool(b) => {
                3u8.hash(state);
                b.hash(state)
            }
        }
    }
}

/// One data record.
pub type Row = Vec<CsvValue>;
/// One column, top to bottom.
pub type TransposedRow = Vec<CsvValue>;
/// Data records in file order.
pub type Matrix = Vec<Row>;

/// Parses raw cell text as a value of type `ty`.
///
/// The text is taken as-is: whitespace trimming of unquoted fields happens
/// in the parser backends.
pub fn parse_cell(ty: CsvType, raw: &str) -> Result<CsvValue, String> {
    let parsed = match ty {
        CsvType::String => return Ok(CsvValue::Text(raw.to_owned())),
        CsvType::Integer => parse_integer(raw).map(CsvValue::Int),
        CsvType::Float => parse_float(raw).map(CsvValue::Flt),
        CsvType::Boolean => parse_boolean(raw).map(CsvValue::Bool),
    };
    parsed.ok_or_else(|| format!("cell value {raw:?} is not a valid {ty}"))
}

fn parse_integer(raw: &str) -> Option<i64> {
    let digits = raw.strip_prefix(['+', '-']).unwrap_or(raw);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // out-of-range values fail here instead of wrapping
    raw.parse::<i64>().ok()
}

fn parse_float(raw: &str) -> Option<f64> {
    if !is_decimal_literal(raw) {
        return None;
    }
    raw.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// `[+-]? (d+ ('.' d*)? | '.' d+) ([eE] [+-]? d+)?`
fn is_decimal_literal(raw: &str) -> bool {
    let bytes = raw.as_bytes();
    let mut i = 0;
    let count_digits = |i: &mut usize| {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - start
    };
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let int_digits = count_digits(&mut i);
    let mut frac_digits = 0;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        frac_digits = count_digits(&mut i);
    }
    if int_digits == 0 && frac_digits == 0 {
        return false;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        if count_digits(&mut i) == 0 {
            return false;
        }
    }
    i == bytes.len()
}

fn parse_boolean(raw: &str) -> Option<bool> {
    if raw.eq_ignore_ascii_case("true") {
        Some(true)
    } else if raw.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

/// Result of [`apply_default`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefaultDecision<'a> {
    UseDefault,
    Keep(&'a str),
}

/// An empty unquoted field (a comma-sequence) takes the header's default;
/// anything else, including a quoted empty string, is kept.
pub fn apply_default(raw: &str, quoted: bool) -> DefaultDecision<'_> {
    if raw.is_empty() && !quoted {
        DefaultDecision::UseDefault
    } else {
        DefaultDecision::Keep(raw)
    }
}

/// Columns of a rectangular matrix. Panics on ragged input.
pub fn transpose<T: Clone>(matrix: &[Vec<T>]) -> Vec<Vec<T>> {
    let Some(first) = matrix.first() else {
        return Vec::new();
    };
    let width = first.len();
    let mut columns: Vec<Vec<T>> = (0..width)
        .map(|_| Vec::with_capacity(matrix.len()))
        .collect();
    for row in matrix {
        assert_eq!(row.len(), width, "transpose of a ragged matrix");
        for (column, cell) in columns.iter_mut().zip(row) {
            column.push(cell.clone());
        }
    }
    columns
}

/// `|a - b| <= 0.5 * 10^-precision`.
///
/// Non-finite operands are equal only when they are the same infinity.
pub fn approx_eq<F: Float>(a: F, b: F, precision: u32) -> bool {
    if !a.is_finite() || !b.is_finite() {
        return a.is_infinite() && a == b;
    }
    let ten = F::from(10.0).expect("10 is representable");
    let half = F::from(0.5).expect("0.5 is representable");
    let exponent = i32::try_from(precision).unwrap_or(i32::MAX);
    (a - b).abs() <= half * ten.powi(-exponent)
}
