//! Long-format plot tables from reports.

use std::str::FromStr;

use crate::error::CliError;
use crate::report::{fmt_float, Row};

pub const PLOT_COLUMNS: [&str; 5] = ["scenario", "check", "x", "y", "yerr"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// The row's `x` column.
    X,
    /// The check index.
    Index,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Axis::X),
            "index" => Ok(Axis::Index),
            other => Err(CliError::UnknownAxis(other.to_string())),
        }
    }
}

/// CSV with columns `scenario, check, x, y, yerr`; `yerr` is the sum of both error budgets.
/// Rows keep report order; `kind` keeps only checks of that kind.
pub fn plotdata(rows: &[Row], axis: Axis, kind: Option<&str>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLOT_COLUMNS).expect("in-memory write");
    for r in rows.iter().filter(|r| kind.is_none_or(|k| r.kind == k)) {
        let x = match axis {
            Axis::X => r.x,
            Axis::Index => r.check as f64,
        };
        w.write_record([r.scenario.clone(), r.check.to_string(), fmt_float(x), fmt_float(r.value), fmt_float(r.total_error())])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_gives_header_only() {
        assert_eq!(plotdata(&[], Axis::X, None), "scenario,check,x,y,yerr\n");
    }

    #[test]
    fn unknown_axis_is_rejected() {
        assert!(matches!("radius".parse::<Axis>(), Err(CliError::UnknownAxis(_))));
    }
}
