//! CSV tables with `#`-prefixed metadata and JSON sidecars.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SCHEMA: &str = "chernlab-csv/1";

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<i64>> for Cell {
    fn from(v: Option<i64>) -> Self {
        v.map_or(Cell::Text("gapless".into()), Cell::Int)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {SCHEMA}");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {}", v.replace('\n', " "));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// The CSV text without its metadata lines.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let mut t = Table::new(&["x", "k", "tag"]).meta("seed", 7);
        let x = 0.1 + 0.2;
        t.push(vec![x.into(), 3usize.into(), "a".into()]);
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("# schema: chernlab-csv/1\n# seed: 7\n"));
        let body = csv_body(&text);
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(rec[0].parse::<f64>().unwrap().to_bits(), x.to_bits());
        assert_eq!(&rec[1], "3");
    }

    #[test]
    fn gapless_cells() {
        assert_eq!(Cell::from(None::<i64>).render(), "gapless");
        assert_eq!(Cell::from(Some(-1i64)).render(), "-1");
    }
}
