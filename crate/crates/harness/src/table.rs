//! CSV tables with a header row.
//!
//! Numbers are written so that reading them back yields the same bits:
//! integral values below 2^53 as plain integers, everything else in
//! scientific notation with 17 significant digits, `NaN` and `inf` spelled
//! the way Rust parses them. When reading, any cell that parses as `f64` is
//! a number and anything else is text.

use std::fs;
use std::path::Path;

use pfc_core::io::fmt_f64;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn read(s: &str) -> Cell {
        match s.parse::<f64>() {
            Ok(v) => Cell::Num(v),
            Err(_) => Cell::Text(s.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

const EXACT_INT: f64 = 9_007_199_254_740_992.0;

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.fract() == 0.0 && v.abs() < EXACT_INT {
        format!("{v:.0}")
    } else {
        fmt_f64(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name; `None` if it is missing or holds text.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].render()).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| table_error("<memory>", e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| table_error("<memory>", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| table_error("<memory>", e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        parse_named(&text, &path.display().to_string())
    }
}

fn table_error(origin: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Table {
        origin: origin.to_string(),
        message: message.into(),
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    parse_named(text, "<csv>")
}

fn parse_named(text: &str, origin: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| table_error(origin, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(table_error(origin, "missing header row"));
    }
    let mut table = Table::new(&header);
    for rec in r.records() {
        let rec = rec.map_err(|e| table_error(origin, e.to_string()))?;
        table.rows.push(rec.iter().map(Cell::read).collect());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(-0.0), "-0");
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_num(1e300), "1.0000000000000001e300");
    }

    #[test]
    fn mixed_cells_round_trip() {
        let mut t = Table::new(&["t", "value", "metric_kind"]);
        t.push(vec![0.0.into(), 0.25.into(), "PFC1".into()]);
        t.push(vec![1.0.into(), f64::NAN.into(), "PFC2".into()]);
        let back = parse_table(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.column("value").unwrap()[0], 0.25);
        assert!(back.column("value").unwrap()[1].is_nan());
        assert_eq!(back.text_column("metric_kind").unwrap(), vec!["PFC1", "PFC2"]);
        assert!(back.column("metric_kind").is_none());
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(parse_table("a,b\n1,2\n3\n").is_err());
        assert!(parse_table("").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(&["x"]);
        t.push(vec![(1.0 / 3.0).into()]);
        t.write(&p).unwrap();
        assert_eq!(Table::read(&p).unwrap(), t);
    }

    proptest! {
        #[test]
        fn numbers_round_trip_bitwise(bits in prop::collection::vec(any::<u64>(), 1..20)) {
            let mut t = Table::new(&["v"]);
            for b in &bits {
                t.push(vec![f64::from_bits(*b).into()]);
            }
            let back = parse_table(&t.to_csv_string().unwrap()).unwrap();
            let vals = back.column("v").unwrap();
            for (b, v) in bits.iter().zip(vals) {
                let orig = f64::from_bits(*b);
                if orig.is_nan() {
                    prop_assert!(v.is_nan());
                } else {
                    prop_assert_eq!(v.to_bits(), *b);
                }
            }
        }
    }
}
