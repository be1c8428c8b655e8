//! Report emission. Everything written here is deterministic: same config
//! and seed, same bytes.

use std::fmt::Write as _;

use cel_core::estimates::InequalityCheck;
use cel_core::norms::{NormReport, NORM_REPORT_CSV_HEADER};

use crate::checks::formula;

pub fn norms_csv(reports: &[NormReport<f64>]) -> String {
    let mut out = String::from(NORM_REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn ledger_csv(ledger: &[InequalityCheck<f64>]) -> String {
    let mut buf = Vec::new();
    cel_core::estimates::write_ledger_csv(ledger, &mut buf).expect("string write");
    String::from_utf8(buf).expect("csv is ascii")
}

/// One block per check: verdict, statement, margin, constant, notes.
pub fn summary(ledger: &[InequalityCheck<f64>]) -> String {
    let mut out = String::new();
    for check in ledger {
        let verdict = if check.pass { "pass" } else { "FAIL" };
        let _ = writeln!(out, "[{verdict}] {}", check.name);
        let _ = writeln!(out, "    {}", formula(&check.name));
        let _ = writeln!(
            out,
            "    margin {:+.6e} over {} samples",
            check.margin,
            check.times.len()
        );
        if let Some(c) = check.fitted_constant {
            let _ = writeln!(out, "    fitted constant {c:.6e}");
        }
        if !check.notes.is_empty() {
            let _ = writeln!(out, "    note: {}", check.notes);
        }
    }
    out
}
