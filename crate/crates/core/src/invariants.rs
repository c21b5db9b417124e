//! User-definable invariants at cell, row, column and file level, the
//! implicit checks that always run, and full-document evaluation.
//!
//! Every invariant returns a [`Reason`]: `None` when it holds, otherwise a
//! non-empty message. Invariants must be pure; evaluation relies on that to
//! stop column checks at the first failing prefix.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::model::{CsvError, Data, Header, Headers};
use crate::value::{approx_eq, transpose, CsvType, CsvValue, Reason};

pub const CELL_PREFIX: &str = "Invalid cell invariant: ";
pub const ROW_PREFIX: &str = "Invalid row invariant: ";
pub const COL_PREFIX: &str = "Invalid col invariant: ";
pub const FILE_PREFIX: &str = "Invalid file invariant: ";

/// Predicate over one cell given its declared type.
pub trait CellInvariant: Send + Sync {
    fn check(&self, ty: CsvType, value: &CsvValue) -> Reason;
}

/// Predicate over one row given all headers.
pub trait RowInvariant: Send + Sync {
    fn check(&self, headers: &Headers, row: &[CsvValue]) -> Reason;
}

/// Predicate over one column given its header.
pub trait ColumnInvariant: Send + Sync {
    fn check(&self, header: &Header, column: &[CsvValue]) -> Reason;

    /// Smallest `k` such that `check` fails on `column[..k]`, with its reason.
    ///
    /// Implementations may override this with an incremental search as long
    /// as the answer matches the prefix-by-prefix definition.
    fn first_failure(&self, header: &Header, column: &[CsvValue]) -> Option<(usize, String)> {
        (1..=column.len()).find_map(|k| self.check(header, &column[..k]).map(|r| (k, r)))
    }
}

/// Predicate over the whole matrix.
pub trait FileInvariant: Send + Sync {
    fn check(&self, headers: &Headers, matrix: &[Vec<CsvValue>]) -> Reason;
}

impl<F> CellInvariant for F
where
    F: Fn(CsvType, &CsvValue) -> Reason + Send + Sync,
{
    fn check(&self, ty: CsvType, value: &CsvValue) -> Reason {
        self(ty, value)
    }
}

impl<F> RowInvariant for F
where
    F: Fn(&Headers, &[CsvValue]) -> Reason + Send + Sync,
{
    fn check(&self, headers: &Headers, row: &[CsvValue]) -> Reason {
        self(headers, row)
    }
}

impl<F> ColumnInvariant for F
where
    F: Fn(&Header, &[CsvValue]) -> Reason + Send + Sync,
{
    fn check(&self, header: &Header, column: &[CsvValue]) -> Reason {
        self(header, column)
    }
}

impl<F> FileInvariant for F
where
    F: Fn(&Headers, &[Vec<CsvValue>]) -> Reason + Send + Sync,
{
    fn check(&self, headers: &Headers, matrix: &[Vec<CsvValue>]) -> Reason {
        self(headers, matrix)
    }
}

/// Row and file invariants. Cell and column invariants live on headers.
#[derive(Clone, Default)]
pub struct InvariantSuite {
    pub row: Option<Arc<dyn RowInvariant>>,
    pub file: Option<Arc<dyn FileInvariant>>,
}

impl InvariantSuite {
    pub fn empty() -> InvariantSuite {
        InvariantSuite::default()
    }

    pub fn with_row(mut self, inv: Arc<dyn RowInvariant>) -> Self {
        self.row = Some(inv);
        self
    }

    pub fn with_file(mut self, inv: Arc<dyn FileInvariant>) -> Self {
        self.file = Some(inv);
        self
    }
}

impl std::fmt::Debug for InvariantSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InvariantSuite")
            .field("row", &self.row.is_some())
            .field("file", &self.file.is_some())
            .finish()
    }
}

/// Cell type conformance, checked for every cell.
pub fn implicit_cell_check(ty: CsvType, value: &CsvValue) -> Reason {
    if value.conforms_to(ty) {
        None
    } else {
        Some(format!("cell value is not of declared type {ty}"))
    }
}

/// Row width must match the header count, in both directions.
pub fn implicit_row_width_check(header_count: usize, row_width: usize, row_no: usize) -> Reason {
    let kind = match row_width.cmp(&header_count) {
        std::cmp::Ordering::Equal => return None,
        std::cmp::Ordering::Less => "short",
        std::cmp::Ordering::Greater => "long",
    };
    Some(format!(
        "CSV row {row_no} is too {kind} for header: expected {header_count} columns found {row_width} columns"
    ))
}

/// Every violated implicit or user invariant of `data`, located by source
/// row number and column.
///
/// Column invariants are evaluated on growing prefixes of the column and
/// report the first row at which they fail. Row failures are attributed to
/// column 1, file failures to `(1, 1)`.
pub fn csv_invariants_failed(data: &Data, suite: &InvariantSuite) -> BTreeSet<CsvError> {
    let headers = data.headers();
    let matrix = data.matrix();
    let row_no = |index: usize| data.row_numbers()[index];
    let mut errors = BTreeSet::new();

    for (r, row) in matrix.iter().enumerate() {
        for (c, (header, cell)) in headers.iter().zip(row).enumerate() {
            if let Some(reason) = implicit_cell_check(header.ty(), cell) {
                errors.insert(CsvError::new(row_no(r), c + 1, reason));
            } else if let Some(inv) = header.cell_inv() {
                if let Some(reason) = inv.check(header.ty(), cell) {
                    errors.insert(CsvError::new(row_no(r), c + 1, format!("{CELL_PREFIX}{reason}")));
                }
            }
        }
        if let Some(inv) = &suite.row {
            if let Some(reason) = inv.check(headers, row) {
                errors.insert(CsvError::new(row_no(r), 1, format!("{ROW_PREFIX}{reason}")));
            }
        }
    }

    if headers.iter().any(|h| h.col_inv().is_some()) && !matrix.is_empty() {
        let columns = transpose(matrix);
        for (c, (header, column)) in headers.iter().zip(&columns).enumerate() {
            if let Some(inv) = header.col_inv() {
                if let Some((k, reason)) = inv.first_failure(header, column) {
                    errors.insert(CsvError::new(row_no(k - 1), c + 1, format!("{COL_PREFIX}{reason}")));
                }
            }
        }
    }

    if let Some(inv) = &suite.file {
        if let Some(reason) = inv.check(headers, matrix) {
            errors.insert(CsvError::new(1, 1, format!("{FILE_PREFIX}{reason}")));
        }
    }

    errors
}

/// Numeric bounds on a cell. Non-numeric cells pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeCheck {
    pub lo: f64,
    pub hi: f64,
    pub low_msg: String,
    pub high_msg: String,
}

impl CellInvariant for RangeCheck {
    fn check(&self, _ty: CsvType, value: &CsvValue) -> Reason {
        let x = value.as_f64()?;
        if x < self.lo {
            Some(self.low_msg.clone())
        } else if x > self.hi {
            Some(self.high_msg.clone())
        } else {
            None
        }
    }
}

pub fn make_range_cell_inv(
    lo: f64,
    hi: f64,
    low_msg: impl Into<String>,
    high_msg: impl Into<String>,
) -> Arc<dyn CellInvariant> {
    Arc::new(RangeCheck {
        lo,
        hi,
        low_msg: low_msg.into(),
        high_msg: high_msg.into(),
    })
}

/// Fails when any value appears twice in the column.
#[derive(Debug, Clone, PartialEq)]
pub struct UniqueValues {
    pub msg: String,
}

impl ColumnInvariant for UniqueValues {
    fn check(&self, _header: &Header, column: &[CsvValue]) -> Reason {
        let distinct: HashSet<_> = column.iter().map(CsvValue::set_key).collect();
        (distinct.len() != column.len()).then(|| self.msg.clone())
    }

    // duplicates never disappear from a longer prefix, so the first failing
    // prefix ends at the first repeated value
    fn first_failure(&self, _header: &Header, column: &[CsvValue]) -> Option<(usize, String)> {
        let mut seen = HashSet::with_capacity(column.len());
        column
            .iter()
            .position(|v| !seen.insert(v.set_key()))
            .map(|i| (i + 1, self.msg.clone()))
    }
}

pub fn make_unique_col_inv(msg: impl Into<String>) -> Arc<dyn ColumnInvariant> {
    Arc::new(UniqueValues { msg: msg.into() })
}

pub const BMI_HEADER_MSG: &str = "invalid BMI header";
pub const BMI_MISMATCH_MSG: &str = "invalid BMI for given CSV weight and height";

/// Checks a BMI column against weight (kg) and height (cm) columns.
/// Column indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmiConsistency {
    pub weight_col: usize,
    pub height_col: usize,
    pub bmi_col: usize,
    pub precision: u32,
}

impl BmiConsistency {
    pub fn expected_bmi(weight_kg: f64, height_cm: f64) -> f64 {
        let height_m = height_cm / 100.0;
        weight_kg / (height_m * height_m)
    }
}

impl RowInvariant for BmiConsistency {
    fn check(&self, headers: &Headers, row: &[CsvValue]) -> Reason {
        let needed = self.weight_col.max(self.height_col).max(self.bmi_col);
        if headers.len() < needed || row.len() < needed {
            return Some(BMI_HEADER_MSG.to_owned());
        }
        let weight = row[self.weight_col - 1].as_f64()?;
        let height = row[self.height_col - 1].as_f64()?;
        let recorded = row[self.bmi_col - 1].as_f64()?;
        let bmi = BmiConsistency::expected_bmi(weight, height);
        if approx_eq(recorded, bmi, self.precision) {
            None
        } else {
            Some(BMI_MISMATCH_MSG.to_owned())
        }
    }
}

pub fn make_bmi_row_inv(
    weight_col: usize,
    height_col: usize,
    bmi_col: usize,
    precision: u32,
) -> Arc<dyn RowInvariant> {
    Arc::new(BmiConsistency {
        weight_col,
        height_col,
        bmi_col,
        precision,
    })
}

/// The numeric cells of column `col` (1-based) must sum to `expected`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSum {
    pub col: usize,
    pub expected: f64,
    pub precision: u32,
    pub msg: String,
}

impl FileInvariant for ColumnSum {
    fn check(&self, _headers: &Headers, matrix: &[Vec<CsvValue>]) -> Reason {
        let sum: f64 = matrix
            .iter()
            .filter_map(|row| row.get(self.col - 1).and_then(CsvValue::as_f64))
            .sum();
        (!approx_eq(sum, self.expected, self.precision)).then(|| self.msg.clone())
    }
}

pub fn make_col_sum_file_inv(
    col: usize,
    expected: f64,
    precision: u32,
    msg: impl Into<String>,
) -> Arc<dyn FileInvariant> {
    Arc::new(ColumnSum {
        col,
        expected,
        precision,
        msg: msg.into(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::model::CsvSettings;
    use crate::value::CsvValue::{Flt, Int, Text};

    fn header(name: &str, ty: CsvType) -> Header {
        Header::new(name, ty, ty.canonical_default()).unwrap()
    }

    fn data(headers: Vec<Header>, matrix: Vec<Vec<CsvValue>>) -> Data {
        Data::new(CsvSettings::default(), Headers::new(headers).unwrap(), matrix).unwrap()
    }

    #[test]
    fn implicit_cell() {
        assert_eq!(implicit_cell_check(CsvType::Integer, &Int(5)), None);
        assert_eq!(
            implicit_cell_check(CsvType::Integer, &Text("x".into())).as_deref(),
            Some("cell value is not of declared type Integer")
        );
        assert_eq!(implicit_cell_check(CsvType::String, &Text(String::new())), None);
    }

    #[test]
    fn implicit_width() {
        assert_eq!(
            implicit_row_width_check(5, 4, 1).as_deref(),
            Some("CSV row 1 is too short for header: expected 5 columns found 4 columns")
        );
        assert_eq!(implicit_row_width_check(5, 5, 1), None);
        assert_eq!(
            implicit_row_width_check(5, 6, 2).as_deref(),
            Some("CSV row 2 is too long for header: expected 5 columns found 6 columns")
        );
    }

    #[test]
    fn range() {
        let inv = make_range_cell_inv(18.0, 65.0, "below minimal age", "above maximal age");
        assert_eq!(inv.check(CsvType::Integer, &Int(17)).as_deref(), Some("below minimal age"));
        assert_eq!(inv.check(CsvType::Integer, &Int(66)).as_deref(), Some("above maximal age"));
        assert_eq!(inv.check(CsvType::Integer, &Int(40)), None);
        assert_eq!(inv.check(CsvType::Integer, &Int(18)), None);
        assert_eq!(inv.check(CsvType::Integer, &Int(65)), None);
        assert_eq!(inv.check(CsvType::String, &Text("x".into())), None);
    }

    #[test]
    fn unique() {
        let inv = make_unique_col_inv("no duplicate ages are allowed");
        let h = header("Name", CsvType::String);
        let col = |xs: &[&str]| xs.iter().map(|s| Text(s.to_string())).collect::<Vec<_>>();
        assert_eq!(
            inv.check(&h, &col(&["a", "b", "a"])).as_deref(),
            Some("no duplicate ages are allowed")
        );
        assert_eq!(inv.check(&h, &col(&["a", "b", "c"])), None);
        assert_eq!(inv.check(&h, &[]), None);
        assert_eq!(
            inv.first_failure(&h, &col(&["a", "b", "c", "b", "a"])),
            Some((4, "no duplicate ages are allowed".into()))
        );
        // 0.0 and -0.0 are one value
        assert!(inv.check(&h, &[Flt(0.0), Flt(-0.0)]).is_some());
    }

    #[test]
    fn bmi() {
        let hs = Headers::new(vec![
            header("Name", CsvType::String),
            header("Age", CsvType::Integer),
            header("Weight", CsvType::Float),
            header("Height", CsvType::Float),
            header("BMI", CsvType::Float),
        ])
        .unwrap();
        let inv = make_bmi_row_inv(3, 4, 5, 2);
        let row = |bmi: f64| vec![Text("Bob".into()), Int(40), Flt(70.0), Flt(175.0), Flt(bmi)];
        assert_eq!(inv.check(&hs, &row(22.86)), None);
        assert_eq!(inv.check(&hs, &row(30.0)).as_deref(), Some(BMI_MISMATCH_MSG));
        // non-numeric operand is left to the type check
        let mut bad = row(22.86);
        bad[2] = Text("heavy".into());
        assert_eq!(inv.check(&hs, &bad), None);

        let three = Headers::simple(&[CsvType::Float; 3]).unwrap();
        assert_eq!(
            inv.check(&three, &[Flt(1.0), Flt(1.0), Flt(1.0)]).as_deref(),
            Some(BMI_HEADER_MSG)
        );
    }

    #[test]
    fn col_sum() {
        let hs = Headers::simple(&[CsvType::Float]).unwrap();
        let m = vec![vec![Flt(10.0)], vec![Flt(20.0)]];
        assert_eq!(make_col_sum_file_inv(1, 30.0, 2, "tax").check(&hs, &m), None);
        assert_eq!(
            make_col_sum_file_inv(1, 31.0, 2, "tax").check(&hs, &m).as_deref(),
            Some("tax")
        );
        assert_eq!(make_col_sum_file_inv(1, 0.0, 2, "tax").check(&hs, &[]), None);
        assert!(make_col_sum_file_inv(1, 1.0, 2, "tax").check(&hs, &[]).is_some());
    }

    #[test]
    fn evaluation_locates_each_kind() {
        let age = header("Age", CsvType::Integer)
            .with_cell_inv(make_range_cell_inv(18.0, 65.0, "below minimal age", "above maximal age"));
        let name = header("Name", CsvType::String).with_col_inv(make_unique_col_inv("repeated names"));
        let d = data(
            vec![name, age],
            vec![
                vec![Text("Ann".into()), Int(30)],
                vec![Text("Bob".into()), Text("x".into())],
                vec![Text("Cid".into()), Int(17)],
                vec![Text("Bob".into()), Int(40)],
            ],
        );
        let suite = InvariantSuite::empty()
            .with_row(Arc::new(|_: &Headers, row: &[CsvValue]| {
                (row[0] == Text("Ann".into())).then(|| "no Ann".to_owned())
            }))
            .with_file(make_col_sum_file_inv(2, 0.0, 0, "sum"));
        let got: Vec<_> = csv_invariants_failed(&d, &suite).into_iter().collect();
        assert_eq!(
            got,
            vec![
                CsvError::new(1, 1, "Invalid file invariant: sum"),
                CsvError::new(1, 1, "Invalid row invariant: no Ann"),
                CsvError::new(2, 2, "cell value is not of declared type Integer"),
                CsvError::new(3, 2, "Invalid cell invariant: below minimal age"),
                CsvError::new(4, 1, "Invalid col invariant: repeated names"),
            ]
        );
    }

    #[test]
    fn errors_use_source_row_numbers() {
        let age = header("Age", CsvType::Integer)
            .with_cell_inv(make_range_cell_inv(18.0, 65.0, "below minimal age", "above maximal age"));
        let d = Data::with_row_numbers(
            CsvSettings::default(),
            Headers::new(vec![age]).unwrap(),
            vec![vec![Int(20)], vec![Int(17)]],
            vec![2, 3],
        )
        .unwrap();
        let got = csv_invariants_failed(&d, &InvariantSuite::empty());
        assert_eq!(
            got.into_iter().collect::<Vec<_>>(),
            vec![CsvError::new(3, 1, "Invalid cell invariant: below minimal age")]
        );
    }

    #[test]
    fn empty_matrix_has_no_failures() {
        let d = data(
            vec![header("Name", CsvType::String).with_col_inv(make_unique_col_inv("dup"))],
            vec![],
        );
        let suite = InvariantSuite::empty().with_row(make_bmi_row_inv(1, 2, 3, 2));
        assert!(csv_invariants_failed(&d, &suite).is_empty());
    }

    #[test]
    fn cell_invariants_skip_mistyped_cells() {
        static CALLS: AtomicUsize = AtomicUsize::new(0);
        let probe = |_: CsvType, _: &CsvValue| {
            CALLS.fetch_add(1, Ordering::SeqCst);
            None
        };
        let d = data(
            vec![header("Age", CsvType::Integer).with_cell_inv(Arc::new(probe))],
            vec![vec![Int(1)], vec![Text("x".into())], vec![Int(2)], vec![Flt(1.5)]],
        );
        let errors = csv_invariants_failed(&d, &InvariantSuite::empty());
        assert_eq!(errors.len(), 2);
        assert_eq!(CALLS.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn closure_column_invariant_uses_prefixes() {
        // fails once the running total passes 10
        let inv = |_: &Header, col: &[CsvValue]| {
            let total: f64 = col.iter().filter_map(CsvValue::as_f64).sum();
            (total > 10.0).then(|| "too much".to_owned())
        };
        let d = data(
            vec![header("N", CsvType::Integer).with_col_inv(Arc::new(inv))],
            vec![vec![Int(4)], vec![Int(5)], vec![Int(6)], vec![Int(-20)]],
        );
        let errors: Vec<_> = csv_invariants_failed(&d, &InvariantSuite::empty()).into_iter().collect();
        assert_eq!(errors, vec![CsvError::new(3, 1, "Invalid col invariant: too much")]);
    }
}
