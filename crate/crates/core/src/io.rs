//! Low-level entry points: file status, typed CSV read with structural row
//! filtering, CSV write, and the last low-level error.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crate::backend::{BackendKind, ParserBackend, RawField};
use crate::invariants::implicit_row_width_check;
use crate::model::{CsvError, CsvSettings, Data, Headers};
use crate::value::{apply_default, parse_cell, CsvType, CsvValue, DefaultDecision, Reason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileStatus {
    Valid,
    Missing,
    IsDirectory,
    NotReadable,
}

impl FileStatus {
    /// Low-level error text for a path with this status.
    pub fn describe(self, path: &Path) -> Reason {
        let path = path.display();
        match self {
            FileStatus::Valid => None,
            FileStatus::Missing => Some(format!("file not found: {path}")),
            FileStatus::IsDirectory => Some(format!("path is a directory: {path}")),
            FileStatus::NotReadable => Some(format!("file not readable: {path}")),
        }
    }
}

/// `Valid` iff `path` names an existing, readable, regular file.
pub fn file_status(path: &Path) -> FileStatus {
    let meta = match std::fs::metadata(path) {
        Ok(meta) => meta,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return FileStatus::Missing,
        Err(_) => return FileStatus::NotReadable,
    };
    if meta.is_dir() {
        return FileStatus::IsDirectory;
    }
    if !meta.is_file() {
        return FileStatus::NotReadable;
    }
    match File::open(path) {
        Ok(_) => FileStatus::Valid,
        Err(_) => FileStatus::NotReadable,
    }
}

/// Result of a read.
///
/// When `success` is false, `errors` and the matrix are empty and the
/// facade's `last_error` says why. Otherwise `errors` lists the rows
/// dropped for having the wrong width.
#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub success: bool,
    pub errors: BTreeSet<CsvError>,
    pub data: Data,
    /// First row of the file when a header line was expected.
    pub header_row: Option<Vec<String>>,
    /// Data rows the parser produced, accepted or not.
    pub raw_row_count: usize,
}

impl ReadOutcome {
    fn failed(settings: &CsvSettings, headers: &Headers) -> ReadOutcome {
        ReadOutcome {
            success: false,
            errors: BTreeSet::new(),
            data: Data::empty(settings.clone(), headers.clone()),
            header_row: None,
            raw_row_count: 0,
        }
    }
}

/// Stateful facade over the read/write calls; remembers the last
/// low-level error.
#[derive(Debug, Default)]
pub struct CsvIo {
    last_error: Option<String>,
}

impl CsvIo {
    pub fn new() -> CsvIo {
        CsvIo::default()
    }

    pub fn last_error(&self) -> Reason {
        self.last_error.clone()
    }

    /// Reads `path` with a fresh backend of the given kind.
    pub fn read_data(
        &mut self,
        path: &Path,
        kind: BackendKind,
        settings: &CsvSettings,
        headers: &Headers,
        has_header_line: bool,
    ) -> ReadOutcome {
        self.last_error = None;
        if let Some(reason) = file_status(path).describe(path) {
            self.last_error = Some(reason);
            return ReadOutcome::failed(settings, headers);
        }
        let file = match File::open(path) {
            Ok(file) => file,
            Err(e) => {
                self.last_error = Some(format!("cannot open {}: {e}", path.display()));
                return ReadOutcome::failed(settings, headers);
            }
        };
        let mut backend = kind.create(settings.clone());
        self.read_with(Box::new(file), backend.as_mut(), headers, has_header_line)
    }

    /// Reads from any stream with the given backend and its settings.
    ///
    /// Data rows are numbered from 1 after the optional header line. Rows
    /// whose width differs from the header count become errors located at
    /// `(row, header count)` and are left out of the data. Cells that fail
    /// to parse as their column type are kept as `Text` so the invariant
    /// checks can report them.
    pub fn read_with(
        &mut self,
        input: Box<dyn Read + '_>,
        backend: &mut dyn ParserBackend,
        headers: &Headers,
        has_header_line: bool,
    ) -> ReadOutcome {
        self.last_error = None;
        let settings = backend.settings().clone();
        if let Err(e) = settings.validate() {
            self.last_error = Some(e.to_string());
            return ReadOutcome::failed(&settings, headers);
        }

        let width = headers.len();
        let mut header_row = None;
        let mut errors = BTreeSet::new();
        let mut matrix = Vec::new();
        let mut row_numbers = Vec::new();
        let mut raw_row_count = 0;
        {
            let mut rows = backend.parse(input);
            if has_header_line {
                header_row = rows
                    .next()
                    .map(|row| row.into_iter().map(|f| f.text).collect::<Vec<_>>());
            }
            for raw in rows {
                raw_row_count += 1;
                let row_no = raw_row_count;
                if let Some(reason) = implicit_row_width_check(width, raw.len(), row_no) {
                    errors.insert(CsvError::new(row_no, width, reason));
                    continue;
                }
                matrix.push(type_row(headers, raw));
                row_numbers.push(row_no);
            }
        }
        if let Some(err) = backend.last_error() {
            self.last_error = Some(err);
            return ReadOutcome::failed(&settings, headers);
        }

        let data = Data::with_row_numbers(settings, headers.clone(), matrix, row_numbers)
            .expect("rows were width-checked");
        ReadOutcome {
            success: true,
            errors,
            data,
            header_row,
            raw_row_count,
        }
    }

    /// Writes the header names and every row of `data` to `path`.
    pub fn write_data(&mut self, path: &Path, data: &Data) -> bool {
        self.last_error = None;
        let result = File::create(path).and_then(|file| {
            let mut out = BufWriter::new(file);
            write_csv(&mut out, data)?;
            out.flush()
        });
        match result {
            Ok(()) => true,
            Err(e) => {
                self.last_error = Some(format!("cannot write {}: {e}", path.display()));
                false
            }
        }
    }
}

fn type_row(headers: &Headers, raw: Vec<RawField>) -> Vec<CsvValue> {
    headers
        .iter()
        .zip(raw)
        .map(|(header, field)| {
            if let DefaultDecision::UseDefault = apply_default(&field.text, field.quoted) {
                return header.default_value().clone();
            }
            match header.ty() {
                CsvType::String => CsvValue::Text(field.text),
                ty => parse_cell(ty, &field.text).unwrap_or(CsvValue::Text(field.text)),
            }
        })
        .collect()
}

/// Serializes `data`: the header line then one line per row, `\n`
/// terminated.
pub fn write_csv<W: Write>(out: &mut W, data: &Data) -> io::Result<()> {
    let settings = data.settings();
    let mut line = String::new();
    let header_cells = data.headers().iter().map(|h| h.name().to_owned());
    write_line(out, &mut line, settings, header_cells)?;
    for row in data.matrix() {
        write_line(out, &mut line, settings, row.iter().map(CsvValue::render))?;
    }
    Ok(())
}

fn write_line<W: Write>(
    out: &mut W,
    line: &mut String,
    settings: &CsvSettings,
    cells: impl Iterator<Item = String>,
) -> io::Result<()> {
    line.clear();
    for (i, cell) in cells.enumerate() {
        if i > 0 {
            line.push(settings.delimiter);
        }
        render_field(line, &cell, settings, i == 0);
    }
    line.push('\n');
    out.write_all(line.as_bytes())
}

/// Appends one field, quoting it when reading it back unquoted would not
/// give the same text.
pub fn render_field(out: &mut String, text: &str, settings: &CsvSettings, first_in_row: bool) {
    if needs_quotes(text, settings, first_in_row) {
        out.push(settings.quote);
        for c in text.chars() {
            if c == settings.quote {
                out.push(c);
            }
            out.push(c);
        }
        out.push(settings.quote);
    } else {
        out.push_str(text);
    }
}

fn needs_quotes(text: &str, settings: &CsvSettings, first_in_row: bool) -> bool {
    let Some(first) = text.chars().next() else {
        // an empty unquoted field would read back as the column default
        return true;
    };
    let last = text.chars().next_back().unwrap_or(first);
    text.chars().any(|c| {
        c == settings.delimiter || c == settings.quote || c == '\n' || c == '\r'
    }) || settings.is_blank(first)
        || settings.is_blank(last)
        || first == '\u{feff}'
        || (first_in_row && Some(first) == settings.line_comment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Header;
    use crate::value::CsvType;

    fn headers(types: &[CsvType]) -> Headers {
        Headers::simple(types).unwrap()
    }

    fn read_str(input: &str, headers: &Headers, has_header: bool) -> (CsvIo, ReadOutcome) {
        let mut io = CsvIo::new();
        let mut backend = BackendKind::Native.create(CsvSettings::default());
        let outcome = io.read_with(Box::new(input.as_bytes()), backend.as_mut(), headers, has_header);
        (io, outcome)
    }

    #[test]
    fn status() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.csv");
        std::fs::write(&file, "x\n").unwrap();
        assert_eq!(file_status(&file), FileStatus::Valid);
        assert_eq!(file_status(dir.path()), FileStatus::IsDirectory);
        assert_eq!(file_status(&dir.path().join("nope.csv")), FileStatus::Missing);
        assert_eq!(file_status(&file), file_status(&file));
    }

    #[test]
    fn reads_integers() {
        let hs = headers(&[CsvType::Integer, CsvType::Integer]);
        let (io, out) = read_str("1,2\n3,4\n", &hs, false);
        assert!(out.success);
        assert!(out.errors.is_empty());
        assert_eq!(io.last_error(), None);
        assert_eq!(
            out.data.matrix(),
            &vec![
                vec![CsvValue::Int(1), CsvValue::Int(2)],
                vec![CsvValue::Int(3), CsvValue::Int(4)]
            ]
        );
    }

    #[test]
    fn short_and_long_rows_are_dropped() {
        let hs = headers(&[CsvType::String; 5]);
        let (_, out) = read_str("h1,h2,h3,h4,h5\na,b,c,d\na,b,c,d,e\na,b,c,d,e,f\n", &hs, true);
        assert!(out.success);
        assert_eq!(out.header_row.as_ref().unwrap()[0], "h1");
        assert_eq!(
            out.errors.iter().cloned().collect::<Vec<_>>(),
            vec![
                CsvError::new(1, 5, "CSV row 1 is too short for header: expected 5 columns found 4 columns"),
                CsvError::new(3, 5, "CSV row 3 is too long for header: expected 5 columns found 6 columns"),
            ]
        );
        assert_eq!(out.data.row_count(), 1);
        assert_eq!(out.data.row_numbers(), &[2]);
        assert_eq!(out.raw_row_count, 3);
    }

    #[test]
    fn defaults_and_deferred_type_errors() {
        let age = Header::new("Age", CsvType::Integer, CsvValue::Int(18)).unwrap();
        let name = Header::new("Name", CsvType::String, CsvValue::Text("Name".into())).unwrap();
        let hs = Headers::new(vec![name, age]).unwrap();
        let (_, out) = read_str("Bob,\n,40\n\"\",abc\n", &hs, false);
        assert_eq!(
            out.data.matrix(),
            &vec![
                vec![CsvValue::Text("Bob".into()), CsvValue::Int(18)],
                vec![CsvValue::Text("Name".into()), CsvValue::Int(40)],
                vec![CsvValue::Text("".into()), CsvValue::Text("abc".into())],
            ]
        );
    }

    #[test]
    fn quoted_empty_is_not_a_default_for_numbers() {
        let hs = Headers::new(vec![Header::new("Age", CsvType::Integer, CsvValue::Int(18)).unwrap()]).unwrap();
        let (_, out) = read_str("\"\"\n", &hs, false);
        assert_eq!(out.data.matrix(), &vec![vec![CsvValue::Text(String::new())]]);
    }

    #[test]
    fn low_level_failure_empties_everything() {
        let hs = headers(&[CsvType::String, CsvType::String]);
        let (io, out) = read_str("a\nb,c\n\"unterminated", &hs, false);
        assert!(!out.success);
        assert!(out.errors.is_empty());
        assert_eq!(out.data.row_count(), 0);
        assert_eq!(
            io.last_error().as_deref(),
            Some("unterminated quoted field starting at line 3")
        );
    }

    #[test]
    fn missing_path_and_reset() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.csv");
        let good = dir.path().join("good.csv");
        std::fs::write(&good, "1\n").unwrap();
        let hs = headers(&[CsvType::Integer]);
        let mut io = CsvIo::new();
        let out = io.read_data(&missing, BackendKind::Fast, &CsvSettings::default(), &hs, false);
        assert!(!out.success);
        assert_eq!(io.last_error(), Some(format!("file not found: {}", missing.display())));
        let out = io.read_data(&good, BackendKind::Fast, &CsvSettings::default(), &hs, false);
        assert!(out.success);
        assert_eq!(io.last_error(), None);
        let out = io.read_data(dir.path(), BackendKind::Fast, &CsvSettings::default(), &hs, false);
        assert!(!out.success);
        assert!(io.last_error().unwrap().starts_with("path is a directory"));
    }

    #[test]
    fn invalid_settings_fail_the_read() {
        let hs = headers(&[CsvType::Integer]);
        let mut io = CsvIo::new();
        let bad = CsvSettings { delimiter: '"', ..Default::default() };
        let mut backend = BackendKind::Native.create(bad);
        let out = io.read_with(Box::new(&b"1\n"[..]), backend.as_mut(), &hs, false);
        assert!(!out.success);
        assert!(io.last_error().unwrap().starts_with("invalid settings"));
    }

    #[test]
    fn quoting_on_write() {
        let settings = CsvSettings { line_comment: Some('#'), ..Default::default() };
        let quoted = |text: &str, first: bool| {
            let mut out = String::new();
            render_field(&mut out, text, &settings, first);
            out
        };
        assert_eq!(quoted("a,b", false), "\"a,b\"");
        assert_eq!(quoted("say \"hi\"", false), "\"say \"\"hi\"\"\"");
        assert_eq!(quoted("plain", false), "plain");
        assert_eq!(quoted("", false), "\"\"");
        assert_eq!(quoted(" pad", false), "\" pad\"");
        assert_eq!(quoted("two\nlines", false), "\"two\nlines\"");
        assert_eq!(quoted("#tag", true), "\"#tag\"");
        assert_eq!(quoted("#tag", false), "#tag");
    }

    #[test]
    fn write_then_read() {
        let hs = Headers::new(vec![
            Header::new("s", CsvType::String, CsvValue::Text(String::new())).unwrap(),
            Header::new("f", CsvType::Float, CsvValue::Flt(0.0)).unwrap(),
            Header::new("b", CsvType::Boolean, CsvValue::Bool(false)).unwrap(),
        ])
        .unwrap();
        let matrix = vec![
            vec![CsvValue::Text("a,b".into()), CsvValue::Flt(0.1), CsvValue::Bool(true)],
            vec![CsvValue::Text("".into()), CsvValue::Flt(-1e-300), CsvValue::Bool(false)],
        ];
        let data = Data::new(CsvSettings::default(), hs.clone(), matrix.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut io = CsvIo::new();
        assert!(io.write_data(&path, &data));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "s,f,b\n\"a,b\",0.1,true\n\"\",-1e-300,false\n");
        let out = io.read_data(&path, BackendKind::Native, &CsvSettings::default(), &hs, true);
        assert_eq!(out.data.matrix(), &matrix);
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let hs = headers(&[CsvType::Integer]);
        let data = Data::empty(CsvSettings::default(), hs);
        let mut io = CsvIo::new();
        assert!(!io.write_data(&dir.path().join("no/such/dir.csv"), &data));
        assert!(io.last_error().is_some());
    }
}
