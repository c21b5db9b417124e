//! Stateful convenience layer: load with explicit headers, load with header
//! names taken from the file, print to another path.

use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};

use crate::backend::BackendKind;
use crate::invariants::{csv_invariants_failed, InvariantSuite};
use crate::io::{file_status, CsvIo, ReadOutcome};
use crate::model::{CsvError, CsvSettings, Data, Headers};
use crate::value::{CsvType, Reason};

pub const NO_CSV_LOADED: &str = "no CSV loaded";
pub const MISSING_HEADER_ROW: &str = "missing header row";
pub const REFUSE_OVERWRITE: &str = "refusing to overwrite source file";

/// Load state.
///
/// `ferr` holds low-level problems (missing file, parse failure, ...);
/// `pos` holds every structural and invariant failure of the last load.
/// A strict load that finds any failure keeps `pos` for diagnosis but
/// empties the data.
#[derive(Debug)]
pub struct Session {
    file: Option<PathBuf>,
    backend: BackendKind,
    ferr: Reason,
    strict: bool,
    has_header_line: bool,
    pos: BTreeSet<CsvError>,
    structural: BTreeSet<CsvError>,
    data: Option<Data>,
    loaded: bool,
    io: CsvIo,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

impl Session {
    /// A fresh session expecting a header line in loaded files.
    pub fn new() -> Session {
        Session {
            file: None,
            backend: BackendKind::default(),
            ferr: None,
            strict: false,
            has_header_line: true,
            pos: BTreeSet::new(),
            structural: BTreeSet::new(),
            data: None,
            loaded: false,
            io: CsvIo::new(),
        }
    }

    /// Whether `load_csv` treats the first row as a header line.
    pub fn with_header_line(mut self, has_header_line: bool) -> Session {
        self.has_header_line = has_header_line;
        self
    }

    pub fn file(&self) -> Option<&Path> {
        self.file.as_deref()
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn ferr(&self) -> Option<&str> {
        self.ferr.as_deref()
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    /// All failures of the last load.
    pub fn pos(&self) -> &BTreeSet<CsvError> {
        &self.pos
    }

    /// Rows dropped for having the wrong width.
    pub fn structural_errors(&self) -> &BTreeSet<CsvError> {
        &self.structural
    }

    /// Failures other than structural ones.
    pub fn invariant_failures(&self) -> BTreeSet<CsvError> {
        self.pos.difference(&self.structural).cloned().collect()
    }

    pub fn data(&self) -> Option<&Data> {
        self.data.as_ref()
    }

    /// True when the last load found nothing wrong.
    pub fn is_clean(&self) -> bool {
        self.ferr.is_none() && self.pos.is_empty()
    }

    fn reset(&mut self, backend: BackendKind, strict: bool) {
        self.file = None;
        self.backend = backend;
        self.strict = strict;
        self.ferr = None;
        self.pos.clear();
        self.structural.clear();
        self.data = None;
        self.loaded = false;
    }

    fn fail(&mut self, reason: String, empty: Data) {
        self.ferr = Some(reason);
        self.data = Some(empty);
    }

    /// Loads `path` against `headers`, then checks every invariant.
    pub fn load_csv(
        &mut self,
        path: &Path,
        backend: BackendKind,
        settings: &CsvSettings,
        headers: &Headers,
        suite: &InvariantSuite,
        strict: bool,
    ) {
        self.reset(backend, strict);
        if let Some(reason) = file_status(path).describe(path) {
            return self.fail(reason, Data::empty(settings.clone(), headers.clone()));
        }
        let outcome = self
            .io
            .read_data(path, backend, settings, headers, self.has_header_line);
        self.finish(path, outcome, suite);
    }

    /// Loads `path` with one column per type, naming the columns from the
    /// file's first row. Default settings, canonical defaults, no
    /// invariants beyond the implicit checks.
    pub fn load_simple_headers_csv(
        &mut self,
        path: &Path,
        backend: BackendKind,
        types: &[CsvType],
        strict: bool,
    ) {
        self.reset(backend, strict);
        let settings = CsvSettings::default();
        let Ok(headers) = Headers::simple(types) else {
            self.ferr = Some("at least one column type is required".to_owned());
            return;
        };
        if let Some(reason) = file_status(path).describe(path) {
            return self.fail(reason, Data::empty(settings, headers));
        }
        let outcome = self.io.read_data(path, backend, &settings, &headers, true);
        if !outcome.success {
            let reason = self.io.last_error().unwrap_or_else(|| "read failed".to_owned());
            return self.fail(reason, outcome.data);
        }
        let Some(names) = outcome.header_row.clone() else {
            return self.fail(MISSING_HEADER_ROW.to_owned(), outcome.data);
        };
        if names.len() != types.len() {
            let reason = format!(
                "header row has {} columns but {} types were given",
                names.len(),
                types.len()
            );
            return self.fail(reason, outcome.data.emptied());
        }
        let mut named = headers;
        for (i, name) in names.into_iter().enumerate() {
            if let (Some(header), false) = (named.get_mut(i), name.is_empty()) {
                header.set_name(name);
            }
        }
        let data = Data::with_row_numbers(
            settings,
            named,
            outcome.data.matrix().clone(),
            outcome.data.row_numbers().to_vec(),
        )
        .expect("same shape as the read data");
        let outcome = ReadOutcome { data, ..outcome };
        self.finish(path, outcome, &InvariantSuite::empty());
    }

    fn finish(&mut self, path: &Path, outcome: ReadOutcome, suite: &InvariantSuite) {
        if !outcome.success {
            let reason = self.io.last_error().unwrap_or_else(|| "read failed".to_owned());
            return self.fail(reason, outcome.data);
        }
        self.file = Some(path.to_path_buf());
        self.structural = outcome.errors;
        self.pos = csv_invariants_failed(&outcome.data, suite);
        self.pos.extend(self.structural.iter().cloned());
        self.data = Some(if self.strict && !self.pos.is_empty() {
            outcome.data.emptied()
        } else {
            outcome.data
        });
        self.loaded = true;
    }

    /// Writes the loaded data to `out`, which must not be the loaded file.
    pub fn print_csv(&mut self, out: &Path) -> bool {
        let data = match (&self.data, self.loaded) {
            (Some(data), true) => data,
            _ => {
                self.ferr = Some(NO_CSV_LOADED.to_owned());
                return false;
            }
        };
        if let Some(source) = &self.file {
            if same_path(source, out) {
                self.ferr = Some(REFUSE_OVERWRITE.to_owned());
                return false;
            }
        }
        if self.io.write_data(out, data) {
            true
        } else {
            self.ferr = self.io.last_error();
            false
        }
    }
}

/// Path equality after resolving `.`/`..`, the working directory and, where
/// the files exist, symbolic links.
pub fn same_path(a: &Path, b: &Path) -> bool {
    normalize(a) == normalize(b)
}

fn normalize(path: &Path) -> PathBuf {
    if let Ok(canonical) = path.canonicalize() {
        return canonical;
    }
    let absolute = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    if let (Some(parent), Some(name)) = (absolute.parent(), absolute.file_name()) {
        if let Ok(parent) = parent.canonicalize() {
            return parent.join(name);
        }
    }
    let mut out = PathBuf::new();
    for component in absolute.components() {
        match component {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::make_range_cell_inv;
    use crate::model::Header;
    use crate::value::CsvValue;

    fn age_headers() -> Headers {
        let name = Header::new("Name", CsvType::String, CsvValue::Text("Name".into())).unwrap();
        let age = Header::new("Age", CsvType::Integer, CsvValue::Int(18))
            .unwrap()
            .with_cell_inv(make_range_cell_inv(18.0, 65.0, "below minimal age", "above maximal age"));
        Headers::new(vec![name, age]).unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn strict_and_lenient_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "a.csv", "Name,Age\nAnn,30\nBob,17\n");
        let mut s = Session::new();
        s.load_csv(&path, BackendKind::Native, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), true);
        assert_eq!(s.data().unwrap().row_count(), 0);
        assert_eq!(
            s.pos().iter().cloned().collect::<Vec<_>>(),
            vec![CsvError::new(2, 2, "Invalid cell invariant: below minimal age")]
        );
        assert!(s.ferr().is_none());

        s.load_csv(&path, BackendKind::Native, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), false);
        assert_eq!(s.data().unwrap().row_count(), 2);
        assert_eq!(s.pos().len(), 1);
    }

    #[test]
    fn strict_rejects_short_rows_too() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "a.csv", "Name,Age\nAnn\nBob,30\n");
        let mut s = Session::new();
        s.load_csv(&path, BackendKind::Fast, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), true);
        assert_eq!(s.data().unwrap().row_count(), 0);
        assert_eq!(s.structural_errors().len(), 1);
        assert!(s.invariant_failures().is_empty());
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing.csv");
        let mut s = Session::new();
        s.load_csv(&path, BackendKind::Native, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), false);
        assert_eq!(s.ferr(), Some(format!("file not found: {}", path.display()).as_str()));
        assert!(s.pos().is_empty());
        assert_eq!(s.data().unwrap().row_count(), 0);
        assert!(s.file().is_none());
        assert!(!s.print_csv(&dir.path().join("out.csv")));
        assert_eq!(s.ferr(), Some(NO_CSV_LOADED));
    }

    #[test]
    fn simple_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "m.csv", "Name,Age,Member\nBob,41,true");
        let mut s = Session::new();
        s.load_simple_headers_csv(&path, BackendKind::Native, &[CsvType::String, CsvType::Integer, CsvType::Boolean], false);
        assert!(s.is_clean(), "{:?}", s.ferr());
        let data = s.data().unwrap();
        assert_eq!(data.headers().names(), vec!["Name", "Age", "Member"]);
        assert_eq!(
            data.matrix(),
            &vec![vec![CsvValue::Text("Bob".into()), CsvValue::Int(41), CsvValue::Bool(true)]]
        );

        s.load_simple_headers_csv(&path, BackendKind::Native, &[CsvType::String; 4], false);
        assert!(s.ferr().unwrap().contains("header row has 3 columns but 4 types"));
        assert_eq!(s.data().unwrap().row_count(), 0);

        let empty = write(dir.path(), "e.csv", "");
        s.load_simple_headers_csv(&empty, BackendKind::Fast, &[CsvType::String], false);
        assert_eq!(s.ferr(), Some(MISSING_HEADER_ROW));
        assert_eq!(s.data().unwrap().row_count(), 0);
    }

    #[test]
    fn print_round_trip_and_refusal() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "a.csv", "Name,Age\n\"Ann, Jr\",30\nBob,\n");
        let mut s = Session::new();
        s.load_csv(&path, BackendKind::Native, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), false);
        let original = s.data().unwrap().matrix().clone();

        let out = dir.path().join("out.csv");
        assert!(s.print_csv(&out));
        let mut again = Session::new();
        again.load_csv(&out, BackendKind::Fast, &CsvSettings::default(), &age_headers(), &InvariantSuite::empty(), false);
        assert_eq!(again.data().unwrap().matrix(), &original);

        let sneaky = dir.path().join(".").join("a.csv");
        assert!(!s.print_csv(&sneaky));
        assert_eq!(s.ferr(), Some(REFUSE_OVERWRITE));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "Name,Age\n\"Ann, Jr\",30\nBob,\n");
    }

    #[test]
    fn path_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "");
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        assert!(same_path(&a, &dir.path().join("sub/../a.csv")));
        assert!(!same_path(&a, &dir.path().join("b.csv")));
        assert!(same_path(&dir.path().join("x/../new.csv"), &dir.path().join("new.csv")));
    }
}
