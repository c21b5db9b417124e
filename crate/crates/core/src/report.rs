//! Plain-text error reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::CsvError;

pub const CLEAN_REPORT: &str = "OK: 0 invariant failures";

/// Renders the structural and invariant failures of one file.
///
/// Errors are listed in (row, column, reason) order, each on its own line
/// indented by four spaces. Identical inputs give identical text.
pub fn render_report(file: &str, structural: &BTreeSet<CsvError>, failures: &BTreeSet<CsvError>) -> String {
    let mut out = String::new();
    if !structural.is_empty() {
        let _ = writeln!(
            out,
            "CSV (IO) error: ignoring {} short rows from \"{file}\"",
            structural.len()
        );
        push_errors(&mut out, structural);
    }
    if !failures.is_empty() {
        let _ = writeln!(out, "CSV invariants failed for \"{file}\":");
        let _ = writeln!(out, "CSV invariant failure at {} cells:", failures.len());
        push_errors(&mut out, failures);
    }
    if structural.is_empty() && failures.is_empty() {
        out.push_str(CLEAN_REPORT);
        out.push('\n');
    }
    out
}

fn push_errors(out: &mut String, errors: &BTreeSet<CsvError>) {
    for e in errors {
        let _ = writeln!(out, "    ({}, {}): \"{}\"", e.row_no, e.col_no, e.reason);
    }
}
