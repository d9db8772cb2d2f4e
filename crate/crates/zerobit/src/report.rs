//! Experiment reports and their CSV / JSON encodings.
//!
//! Reports hold no wall-clock data so that identical inputs give
//! byte-identical files; timing goes to the console only.

use std::io::Write;

use anyhow::Result;
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "true" } else { "false" }.to_owned())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Num(_) | Cell::Empty => s.serialize_none(),
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

/// Decimal text for CSV: '.' separator, scientific below 1e-4 in magnitude.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => format_number(*v),
                Cell::Int(v) => v.to_string(),
                Cell::Text(t) => t.clone(),
                Cell::Empty => String::new(),
            }))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    #[serde(serialize_with = "finite_or_null")]
    pub value: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub std_err: f64,
}

/// One acceptance tolerance evaluated on this run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    #[serde(serialize_with = "finite_or_null")]
    pub value: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub limit: f64,
    pub passed: bool,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub suite: String,
    pub seed: u64,
    pub n: Option<usize>,
    pub budget: Option<usize>,
    pub summary: Estimate,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    /// Observations recorded without a pass/fail verdict.
    pub notes: Vec<String>,
    pub table: Table,
}

impl Report {
    pub fn new(experiment: &str, suite: &str, seed: u64, table: Table) -> Self {
        Self {
            experiment: experiment.to_owned(),
            suite: suite.to_owned(),
            seed,
            n: None,
            budget: None,
            summary: Estimate {
                name: String::new(),
                value: f64::NAN,
                std_err: f64::NAN,
            },
            estimates: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            table,
        }
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64, std_err: f64) {
        self.estimates.push(Estimate {
            name: name.into(),
            value,
            std_err,
        });
    }

    pub fn headline(&mut self, name: impl Into<String>, value: f64, std_err: f64) {
        self.summary = Estimate {
            name: name.into(),
            value,
            std_err,
        };
    }

    /// Records `value <= limit`.
    pub fn check_below(&mut self, criterion: u32, name: impl Into<String>, value: f64, limit: f64) {
        self.checks.push(Check {
            criterion,
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        });
    }

    /// Records `value > limit`.
    pub fn check_above(&mut self, criterion: u32, name: impl Into<String>, value: f64, limit: f64) {
        self.checks.push(Check {
            criterion,
            name: name.into(),
            value,
            limit,
            passed: value > limit,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// One console line: headline estimate and check tally.
    pub fn summary_line(&self) -> String {
        let passed = self.checks.iter().filter(|c| c.passed).count();
        format!(
            "{} [{}]: {} = {} ± {} ({}/{} checks passed)",
            self.experiment,
            self.suite,
            self.summary.name,
            format_number(self.summary.value),
            format_number(self.summary.std_err),
            passed,
            self.checks.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.5e-5), "1.5e-5");
        assert_eq!(format_number(-2e-7), "-2e-7");
        assert_eq!(format_number(1e-4), "0.0001");
        assert_eq!(format_number(72.5), "72.5");
        assert_eq!(format_number(1234567.0), "1234567");
    }

    #[test]
    fn csv_quotes_and_crlf() {
        let mut t = Table::new(&["name", "value", "value_se"]);
        t.push(vec!["a,b".into(), 3e-6.into(), Cell::Empty]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "name,value,value_se\r\n\"a,b\",3e-6,\r\n");
    }

    #[test]
    fn non_finite_json_is_null() {
        let mut r = Report::new("x", "default", 1, Table::new(&["v"]));
        r.table.push(vec![f64::NAN.into()]);
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert!(v["table"]["rows"][0][0].is_null());
        assert!(v["summary"]["value"].is_null());
    }
}
