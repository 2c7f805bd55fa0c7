//! Tabular output as CSV or JSON. JSON is a top-level array with one object
//! per row, keyed by the CSV column names.

use std::io::Write;

use serde_json::{Map, Number, Value};

use crate::error::{InputError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(v) => Value::Number((*v).into()),
            // finiteness is checked on push
            Cell::Float(v) => Value::Number(Number::from_f64(*v).expect("finite")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    /// Appends a row. Non-finite numbers are refused.
    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        assert_eq!(row.len(), self.headers.len(), "row width");
        for (cell, name) in row.iter().zip(&self.headers) {
            if let Cell::Float(v) = cell {
                if !v.is_finite() {
                    return Err(InputError::Usage(format!("column {name} would be {v}")));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let io = |e: csv::Error| InputError::Write(std::io::Error::other(e));
        w.write_record(&self.headers).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text)).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut sink: W) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let object: Map<String, Value> = self.headers.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(object)
            })
            .collect();
        serde_json::to_writer_pretty(&mut sink, &rows).map_err(|e| InputError::Write(e.into()))?;
        writeln!(sink)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, sink: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(sink),
            Format::Json => self.write_json(sink),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(["aggregate", "n", "x"]);
        t.push(vec!["U, 1".into(), 3u64.into(), 0.25.into()]).unwrap();
        t.push(vec!["V".into(), 0u64.into(), 1.0.into()]).unwrap();
        t
    }

    #[test]
    fn csv_quotes_and_orders_columns() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "aggregate,n,x\n\"U, 1\",3,0.25\nV,0,1\n");
    }

    #[test]
    fn json_mirrors_csv_columns() {
        let mut out = Vec::new();
        sample().write_json(&mut out).unwrap();
        let v: Value = serde_json::from_slice(&out).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["aggregate", "n", "x"]);
        assert_eq!(rows[0]["x"], 0.25);
    }

    #[test]
    fn non_finite_values_are_refused() {
        let mut t = Table::new(["x"]);
        assert!(t.push(vec![f64::NAN.into()]).is_err());
        assert!(t.push(vec![f64::INFINITY.into()]).is_err());
        assert!(t.rows().is_empty());
    }
}
