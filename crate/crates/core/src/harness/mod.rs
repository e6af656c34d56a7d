//! Numerical checks of the functional inequalities behind the a priori
//! estimates, and the vanishing-viscosity study.
//!
//! Every check is reported as a [`CheckRow`] carrying both sides of the
//! inequality it tests.

pub mod appendix;
pub mod coercivity;
pub mod oracle;
pub mod quadrature;
pub mod viscosity;

use std::fmt;

pub use appendix::{ds_seminorm, AppendixReport, AppendixSuite};
pub use coercivity::{basic_coercivity_check, high_order_coercivity_check, CoercivityReport};
pub use oracle::{multiplier_oracle, MultiplierOracle};
pub use viscosity::{viscosity_convergence_study, ViscosityReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Soft failure of a sanity scan.
    Warn,
    /// Recorded but not judged.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Warn => "WARN",
            Verdict::Info => "INFO",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inequality `lhs <= rhs` (or a recorded comparison) with its verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
}

impl CheckRow {
    pub fn new(suite: &str, check: &str, case: impl Into<String>, lhs: f64, rhs: f64, verdict: Verdict) -> Self {
        CheckRow {
            suite: suite.into(),
            check: check.into(),
            case: case.into(),
            lhs,
            rhs,
            verdict,
        }
    }

    /// `lhs <= rhs`, judged as a hard check.
    pub fn upper(suite: &str, check: &str, case: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(suite, check, case, lhs, rhs, Verdict::from_bool(lhs <= rhs))
    }

    /// `lhs >= rhs`, judged as a hard check.
    pub fn lower(suite: &str, check: &str, case: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(suite, check, case, lhs, rhs, Verdict::from_bool(lhs >= rhs))
    }

    /// Relative gap `(rhs - lhs)/|rhs|`; positive when an upper bound holds.
    pub fn margin(&self) -> f64 {
        (self.rhs - self.lhs) / self.rhs.abs().max(f64::MIN_POSITIVE)
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

pub const CSV_HEADER: &str = "suite,check,case,lhs,rhs,margin,verdict";

pub fn csv_row(row: &CheckRow) -> String {
    format!(
        "{},{},{},{:.16e},{:.16e},{:.16e},{}",
        row.suite,
        row.check,
        row.case,
        row.lhs,
        row.rhs,
        row.margin(),
        row.verdict
    )
}

/// CSV text with a header and one line per row.
pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Counts per verdict followed by every failed or warned row.
pub fn summary(rows: &[CheckRow]) -> String {
    let count = |v: Verdict| rows.iter().filter(|r| r.verdict == v).count();
    let mut out = format!(
        "{} checks: {} pass, {} fail, {} warn, {} info\n",
        rows.len(),
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Warn),
        count(Verdict::Info)
    );
    for r in rows.iter().filter(|r| matches!(r.verdict, Verdict::Fail | Verdict::Warn)) {
        out.push_str(&format!(
            "  {} {}/{} [{}]: lhs = {:.6e}, rhs = {:.6e}\n",
            r.verdict, r.suite, r.check, r.case, r.lhs, r.rhs
        ));
    }
    out
}

pub fn hard_failures(rows: &[CheckRow]) -> usize {
    rows.iter().filter(|r| r.verdict == Verdict::Fail).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_serialise_both_sides() {
        let r = CheckRow::upper("s", "c", "k=3", 1.0, 2.0);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.margin(), 0.5);
        let csv = rows_to_csv(&[r, CheckRow::lower("s", "c", "k=4", 1.0, 2.0)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",PASS"));
        assert!(lines[2].contains("1.0000000000000000e0,2.0000000000000000e0"));
        assert!(lines[2].ends_with(",FAIL"));
    }

    #[test]
    fn summary_lists_only_failures_and_warnings() {
        let rows = vec![
            CheckRow::upper("a", "x", "1", 1.0, 2.0),
            CheckRow::upper("a", "x", "2", 3.0, 2.0),
            CheckRow::upper("a", "y", "3", 3.0, 2.0).with_verdict(Verdict::Warn),
        ];
        let s = summary(&rows);
        assert!(s.starts_with("3 checks: 1 pass, 1 fail, 1 warn, 0 info"));
        assert_eq!(s.lines().count(), 3);
        assert_eq!(hard_failures(&rows), 1);
    }
}
