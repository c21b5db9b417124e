//! Line-oriented schema files.
//!
//! ```text
//! # comment
//! settings delimiter="," quote="\"" comment="#" skip_blank=true trim=true header=true
//! header name="Age" type=Integer default=18 cell=range(18,65,"below minimal age","above maximal age") col=unique("no duplicate ages are allowed")
//! row bmi(weight=3,height=4,bmi=5,precision=2)
//! file col_sum(col=2,expected=100.0,precision=2,msg="tax total mismatch")
//! ```
//!
//! `header` lines fix the column order. Only the built-in invariants can be
//! expressed; arbitrary predicates go through the library API.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::invariants::{BmiConsistency, ColumnSum, InvariantSuite, RangeCheck, UniqueValues};
use crate::model::{CsvSettings, Header, Headers};
use crate::value::{parse_cell, CsvType, CsvValue};

/// Schema used by the examples, the benchmarks and the golden tests.
pub const EXAMPLE_SCHEMA: &str = r#"# People with age, weight (kg), height (cm) and a redundant BMI column.
settings delimiter="," quote="\"" skip_blank=true trim=true header=true
header name="Name" type=String default="Name" col=unique("repeated names")
header name="Age" type=Integer default=18 cell=range(18,65,"below minimal age","above maximal age")
header name="Weight(Kg)" type=Float default=40.0 cell=range(40,150,"below minimal weight","above maximal weight")
header name="Height(cm)" type=Float default=140.0 cell=range(140,210,"below minimal height","above maximal height")
header name="BMI" type=Float default=15.0 cell=range(15,40,"below minimal BMI","above maximal BMI")
row bmi(weight=3,height=4,bmi=5,precision=2)
"#;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    /// 1-based schema line, when the problem has one.
    pub line: Option<usize>,
    pub message: String,
}

impl SchemaError {
    fn at(line: usize, message: impl Into<String>) -> SchemaError {
        SchemaError {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "schema line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SchemaError {}

#[derive(Debug, Clone, PartialEq)]
pub enum CellRule {
    Range(RangeCheck),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColRule {
    Unique(UniqueValues),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowRule {
    Bmi(BmiConsistency),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FileRule {
    ColSum(ColumnSum),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaHeader {
    pub name: String,
    pub ty: CsvType,
    pub default: CsvValue,
    pub description: Option<String>,
    pub cell: Option<CellRule>,
    pub col: Option<ColRule>,
}

/// A parsed schema file.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaDocument {
    pub settings: CsvSettings,
    pub has_header_line: bool,
    pub headers: Vec<SchemaHeader>,
    pub row: Option<RowRule>,
    pub file: Option<FileRule>,
}

impl SchemaDocument {
    /// Library headers with the built-in invariants attached.
    pub fn headers(&self) -> Headers {
        let headers = self
            .headers
            .iter()
            .map(|h| {
                let mut header = Header::new(h.name.clone(), h.ty, h.default.clone())
                    .expect("defaults are checked at parse time");
                if let Some(d) = &h.description {
                    header = header.with_description(d.clone());
                }
                if let Some(CellRule::Range(r)) = &h.cell {
                    header = header.with_cell_inv(Arc::new(r.clone()));
                }
                if let Some(ColRule::Unique(u)) = &h.col {
                    header = header.with_col_inv(Arc::new(u.clone()));
                }
                header
            })
            .collect();
        Headers::new(headers).expect("schemas have at least one header")
    }

    pub fn suite(&self) -> InvariantSuite {
        let mut suite = InvariantSuite::empty();
        if let Some(RowRule::Bmi(b)) = &self.row {
            suite = suite.with_row(Arc::new(b.clone()));
        }
        if let Some(FileRule::ColSum(c)) = &self.file {
            suite = suite.with_file(Arc::new(c.clone()));
        }
        suite
    }

    /// Serializes the document so that [`parse_schema`] gives it back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.settings;
        let _ = write!(
            out,
            "settings delimiter={} quote={}",
            quote_str(&s.delimiter.to_string()),
            quote_str(&s.quote.to_string())
        );
        if let Some(c) = s.line_comment {
            let _ = write!(out, " comment={}", quote_str(&c.to_string()));
        }
        let _ = writeln!(
            out,
            " skip_blank={} trim={} header={}",
            s.skip_blank_lines, s.trim_unquoted, self.has_header_line
        );
        for h in &self.headers {
            let _ = write!(
                out,
                "header name={} type={} default={}",
                quote_str(&h.name),
                h.ty,
                quote_str(&h.default.render())
            );
            if let Some(d) = &h.description {
                let _ = write!(out, " description={}", quote_str(d));
            }
            if let Some(CellRule::Range(r)) = &h.cell {
                let _ = write!(
                    out,
                    " cell=range({:?},{:?},{},{})",
                    r.lo,
                    r.hi,
                    quote_str(&r.low_msg),
                    quote_str(&r.high_msg)
                );
            }
            if let Some(ColRule::Unique(u)) = &h.col {
                let _ = write!(out, " col=unique({})", quote_str(&u.msg));
            }
            out.push('\n');
        }
        if let Some(RowRule::Bmi(b)) = &self.row {
            let _ = writeln!(
                out,
                "row bmi(weight={},height={},bmi={},precision={})",
                b.weight_col, b.height_col, b.bmi_col, b.precision
            );
        }
        if let Some(FileRule::ColSum(c)) = &self.file {
            let _ = writeln!(
                out,
                "file col_sum(col={},expected={:?},precision={},msg={})",
                c.col,
                c.expected,
                c.precision,
                quote_str(&c.msg)
            );
        }
        out
    }
}

fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Call arguments, each optionally named.
type CallArgs = Vec<(Option<String>, Value)>;

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Quoted(String),
    Bare(String),
    Call(String, CallArgs),
}

impl Value {
    fn describe(&self) -> String {
        match self {
            Value::Quoted(s) => quote_str(s),
            Value::Bare(s) => s.clone(),
            Value::Call(name, _) => format!("{name}(...)"),
        }
    }

    fn text(&self) -> Option<&str> {
        match self {
            Value::Quoted(s) | Value::Bare(s) => Some(s),
            Value::Call(..) => None,
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> SchemaError {
        SchemaError::at(self.line, message)
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.chars.peek().is_none()
    }

    fn ident(&mut self) -> String {
        let mut out = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                out.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        out
    }

    fn expect(&mut self, want: char) -> Result<(), SchemaError> {
        self.skip_ws();
        match self.chars.next() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(self.err(format!("expected `{want}` but found `{c}`"))),
            None => Err(self.err(format!("expected `{want}` at end of line"))),
        }
    }

    fn quoted(&mut self) -> Result<String, SchemaError> {
        self.chars.next();
        let mut out = String::new();
        loop {
            match self.chars.next() {
                None => return Err(self.err("unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.chars.next() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some(c) => return Err(self.err(format!("unknown escape `\\{c}`"))),
                    None => return Err(self.err("unterminated string")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    /// A quoted string, a call `name(args)`, or a bare token.
    fn value(&mut self, in_call: bool) -> Result<Value, SchemaError> {
        self.skip_ws();
        if self.chars.peek() == Some(&'"') {
            return self.quoted().map(Value::Quoted);
        }
        let mut token = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() || c == '(' || c == '"' || (in_call && (c == ',' || c == ')' || c == '=')) {
                break;
            }
            token.push(c);
            self.chars.next();
        }
        if self.chars.peek() == Some(&'(') {
            self.chars.next();
            let args = self.args()?;
            return Ok(Value::Call(token, args));
        }
        if token.is_empty() {
            return Err(match self.chars.peek().copied() {
                Some(c) => self.err(format!("unexpected `{c}`")),
                None => self.err("missing value"),
            });
        }
        Ok(Value::Bare(token))
    }

    fn args(&mut self) -> Result<CallArgs, SchemaError> {
        let mut args = Vec::new();
        self.skip_ws();
        if self.chars.peek() == Some(&')') {
            self.chars.next();
            return Ok(args);
        }
        loop {
            self.skip_ws();
            let value = self.value(true)?;
            self.skip_ws();
            let arg = if self.chars.peek() == Some(&'=') {
                let Value::Bare(name) = value else {
                    return Err(self.err(format!("invalid argument name {}", value.describe())));
                };
                self.chars.next();
                (Some(name), self.value(true)?)
            } else {
                (None, value)
            };
            args.push(arg);
            self.skip_ws();
            match self.chars.next() {
                Some(',') => continue,
                Some(')') => return Ok(args),
                Some(c) => return Err(self.err(format!("expected `,` or `)` but found `{c}`"))),
                None => return Err(self.err("missing `)`")),
            }
        }
    }

    /// `key=value` pairs up to the end of the line.
    fn pairs(&mut self) -> Result<Vec<(String, Value)>, SchemaError> {
        let mut pairs: Vec<(String, Value)> = Vec::new();
        while !self.at_end() {
            let key = self.ident();
            if key.is_empty() {
                let c = self.chars.peek().copied().unwrap_or(' ');
                return Err(self.err(format!("unexpected `{c}`")));
            }
            self.expect('=')?;
            let value = self.value(false)?;
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(self.err(format!("duplicate key `{key}`")));
            }
            pairs.push((key, value));
        }
        Ok(pairs)
    }
}

/// Positional-or-named call arguments.
struct Args<'a> {
    call: &'a str,
    args: &'a [(Option<String>, Value)],
    line: usize,
}

impl Args<'_> {
    fn check(&self, names: &[&str]) -> Result<(), SchemaError> {
        if self.args.len() > names.len() {
            return Err(SchemaError::at(
                self.line,
                format!("{} takes {} arguments, got {}", self.call, names.len(), self.args.len()),
            ));
        }
        for (name, _) in self.args {
            if let Some(name) = name {
                if !names.contains(&name.as_str()) {
                    return Err(SchemaError::at(
                        self.line,
                        format!("unknown argument `{name}` for {}", self.call),
                    ));
                }
            }
        }
        Ok(())
    }

    fn get(&self, position: usize, name: &str) -> Result<&Value, SchemaError> {
        self.args
            .iter()
            .find(|(n, _)| n.as_deref() == Some(name))
            .or_else(|| self.args.get(position).filter(|(n, _)| n.is_none()))
            .map(|(_, v)| v)
            .ok_or_else(|| SchemaError::at(self.line, format!("{} is missing argument `{name}`", self.call)))
    }

    fn text(&self, position: usize, name: &str) -> Result<String, SchemaError> {
        let value = self.get(position, name)?;
        let text = value.text().ok_or_else(|| {
            SchemaError::at(self.line, format!("argument `{name}` of {} must be a value", self.call))
        })?;
        if text.is_empty() {
            return Err(SchemaError::at(self.line, format!("argument `{name}` of {} must not be empty", self.call)));
        }
        Ok(text.to_owned())
    }

    fn real(&self, position: usize, name: &str) -> Result<f64, SchemaError> {
        let text = self.text(position, name)?;
        text.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| SchemaError::at(self.line, format!("argument `{name}` of {}: `{text}` is not a number", self.call)))
    }

    fn natural(&self, position: usize, name: &str) -> Result<u32, SchemaError> {
        let text = self.text(position, name)?;
        text.parse::<u32>().map_err(|_| {
            SchemaError::at(
                self.line,
                format!("argument `{name}` of {}: `{text}` is not a non-negative integer", self.call),
            )
        })
    }

    fn column(&self, position: usize, name: &str) -> Result<usize, SchemaError> {
        let n = self.natural(position, name)?;
        if n == 0 {
            return Err(SchemaError::at(self.line, format!("argument `{name}` of {}: columns are numbered from 1", self.call)));
        }
        Ok(n as usize)
    }
}

fn expect_call(value: &Value, what: &str, line: usize) -> Result<(String, CallArgs), SchemaError> {
    match value {
        Value::Call(name, args) => Ok((name.clone(), args.clone())),
        other => Err(SchemaError::at(line, format!("{what} must be a rule like name(...), found {}", other.describe()))),
    }
}

fn single_char(value: &Value, key: &str, line: usize) -> Result<char, SchemaError> {
    let text = value.text().unwrap_or_default();
    let mut chars = text.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(SchemaError::at(line, format!("{key} must be a single character, found {}", value.describe()))),
    }
}

fn boolean(value: &Value, key: &str, line: usize) -> Result<bool, SchemaError> {
    match value.text() {
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        _ => Err(SchemaError::at(line, format!("{key} must be true or false, found {}", value.describe()))),
    }
}

fn parse_settings(pairs: Vec<(String, Value)>, line: usize) -> Result<(CsvSettings, bool), SchemaError> {
    let mut settings = CsvSettings::default();
    let mut has_header_line = true;
    for (key, value) in pairs {
        match key.as_str() {
            "delimiter" => settings.delimiter = single_char(&value, &key, line)?,
            "quote" => settings.quote = single_char(&value, &key, line)?,
            "comment" => {
                settings.line_comment = if value.text() == Some("") {
                    None
                } else {
                    Some(single_char(&value, &key, line)?)
                }
            }
            "skip_blank" => settings.skip_blank_lines = boolean(&value, &key, line)?,
            "trim" => settings.trim_unquoted = boolean(&value, &key, line)?,
            "header" => has_header_line = boolean(&value, &key, line)?,
            other => return Err(SchemaError::at(line, format!("unknown settings key `{other}`"))),
        }
    }
    settings
        .validate()
        .map_err(|e| SchemaError::at(line, e.to_string()))?;
    Ok((settings, has_header_line))
}

fn parse_header(pairs: Vec<(String, Value)>, line: usize) -> Result<SchemaHeader, SchemaError> {
    let find = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v);
    for (key, _) in &pairs {
        if !["name", "type", "default", "description", "cell", "col"].contains(&key.as_str()) {
            return Err(SchemaError::at(line, format!("unknown header key `{key}`")));
        }
    }
    let name = find("name")
        .and_then(Value::text)
        .filter(|n| !n.is_empty())
        .ok_or_else(|| SchemaError::at(line, "header is missing a name"))?
        .to_owned();
    let ty_value = find("type").ok_or_else(|| SchemaError::at(line, "header is missing a type"))?;
    let ty = ty_value
        .text()
        .and_then(CsvType::from_name)
        .ok_or_else(|| SchemaError::at(line, format!("unknown type `{}`", ty_value.describe())))?;
    let default_text = find("default")
        .ok_or_else(|| SchemaError::at(line, "header is missing a default"))?
        .text()
        .ok_or_else(|| SchemaError::at(line, "default must be a value"))?;
    let default = parse_cell(ty, default_text)
        .map_err(|_| SchemaError::at(line, format!("default does not conform to type {ty}")))?;
    let description = find("description").and_then(Value::text).map(str::to_owned);

    let cell = match find("cell") {
        None => None,
        Some(value) => {
            let (call, args) = expect_call(value, "cell", line)?;
            let a = Args { call: &call, args: &args, line };
            match call.as_str() {
                "range" => {
                    a.check(&["lo", "hi", "low_msg", "high_msg"])?;
                    let range = RangeCheck {
                        lo: a.real(0, "lo")?,
                        hi: a.real(1, "hi")?,
                        low_msg: a.text(2, "low_msg")?,
                        high_msg: a.text(3, "high_msg")?,
                    };
                    if range.lo > range.hi {
                        return Err(SchemaError::at(line, "range lower bound exceeds upper bound"));
                    }
                    Some(CellRule::Range(range))
                }
                other => return Err(SchemaError::at(line, format!("unknown cell invariant `{other}`"))),
            }
        }
    };
    let col = match find("col") {
        None => None,
        Some(value) => {
            let (call, args) = expect_call(value, "col", line)?;
            let a = Args { call: &call, args: &args, line };
            match call.as_str() {
                "unique" => {
                    a.check(&["msg"])?;
                    Some(ColRule::Unique(UniqueValues { msg: a.text(0, "msg")? }))
                }
                other => return Err(SchemaError::at(line, format!("unknown column invariant `{other}`"))),
            }
        }
    };
    Ok(SchemaHeader {
        name,
        ty,
        default,
        description,
        cell,
        col,
    })
}

fn parse_row_rule(value: &Value, line: usize) -> Result<RowRule, SchemaError> {
    let (call, args) = expect_call(value, "row", line)?;
    let a = Args { call: &call, args: &args, line };
    match call.as_str() {
        "bmi" => {
            a.check(&["weight", "height", "bmi", "precision"])?;
            let bmi = BmiConsistency {
                weight_col: a.column(0, "weight")?,
                height_col: a.column(1, "height")?,
                bmi_col: a.column(2, "bmi")?,
                precision: a.natural(3, "precision")?,
            };
            if bmi.weight_col == bmi.height_col || bmi.weight_col == bmi.bmi_col || bmi.height_col == bmi.bmi_col {
                return Err(SchemaError::at(line, "bmi columns must be distinct"));
            }
            Ok(RowRule::Bmi(bmi))
        }
        other => Err(SchemaError::at(line, format!("unknown row invariant `{other}`"))),
    }
}

fn parse_file_rule(value: &Value, line: usize) -> Result<FileRule, SchemaError> {
    let (call, args) = expect_call(value, "file", line)?;
    let a = Args { call: &call, args: &args, line };
    match call.as_str() {
        "col_sum" => {
            a.check(&["col", "expected", "precision", "msg"])?;
            Ok(FileRule::ColSum(ColumnSum {
                col: a.column(0, "col")?,
                expected: a.real(1, "expected")?,
                precision: a.natural(2, "precision")?,
                msg: a.text(3, "msg")?,
            }))
        }
        other => Err(SchemaError::at(line, format!("unknown file invariant `{other}`"))),
    }
}

/// Parses a schema file.
pub fn parse_schema(text: &str) -> Result<SchemaDocument, SchemaError> {
    let mut settings = None;
    let mut headers = Vec::new();
    let mut row = None;
    let mut file = None;
    let mut column_refs: Vec<(usize, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut lexer = Lexer::new(trimmed, line);
        let directive = lexer.ident();
        match directive.as_str() {
            "settings" => {
                if settings.is_some() {
                    return Err(SchemaError::at(line, "duplicate settings directive"));
                }
                settings = Some(parse_settings(lexer.pairs()?, line)?);
            }
            "header" => headers.push(parse_header(lexer.pairs()?, line)?),
            "row" | "file" => {
                let value = lexer.value(false)?;
                if !lexer.at_end() {
                    return Err(SchemaError::at(line, format!("unexpected text after {directive} rule")));
                }
                if directive == "row" {
                    if row.is_some() {
                        return Err(SchemaError::at(line, "duplicate row directive"));
                    }
                    let rule = parse_row_rule(&value, line)?;
                    let RowRule::Bmi(b) = &rule;
                    column_refs.extend([b.weight_col, b.height_col, b.bmi_col].map(|c| (line, c)));
                    row = Some(rule);
                } else {
                    if file.is_some() {
                        return Err(SchemaError::at(line, "duplicate file directive"));
                    }
                    let rule = parse_file_rule(&value, line)?;
                    let FileRule::ColSum(c) = &rule;
                    column_refs.push((line, c.col));
                    file = Some(rule);
                }
            }
            "" => {
                let token = trimmed.split_whitespace().next().unwrap_or(trimmed);
                return Err(SchemaError::at(line, format!("unknown directive `{token}`")));
            }
            other => return Err(SchemaError::at(line, format!("unknown directive `{other}`"))),
        }
    }

    if headers.is_empty() {
        return Err(SchemaError {
            line: None,
            message: "schema has no headers".to_owned(),
        });
    }
    if let Some(&(line, col)) = column_refs.iter().find(|(_, c)| *c > headers.len()) {
        return Err(SchemaError::at(
            line,
            format!("column {col} is out of range for {} headers", headers.len()),
        ));
    }
    let (settings, has_header_line) = settings.unwrap_or((CsvSettings::default(), true));
    Ok(SchemaDocument {
        settings,
        has_header_line,
        headers,
        row,
        file,
    })
}
