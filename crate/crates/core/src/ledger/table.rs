use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// First line of every CSV ledger.
pub const LEDGER_HEADER: &str = "# nsel-ledger v1";

/// Numeric table with named columns, written as a versioned CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::LedgerSchema(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::LedgerSchema(format!("missing column {name}")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{LEDGER_HEADER}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| format_value(*v)))?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let first = first.trim_end();
        if first != LEDGER_HEADER {
            return Err(Error::LedgerSchema(format!(
                "{}: expected header {LEDGER_HEADER:?}, found {first:?}",
                path.display()
            )));
        }
        let mut csv_reader = csv::Reader::from_reader(reader);
        let columns: Vec<String> = csv_reader.headers()?.iter().map(String::from).collect();
        let mut table = Self { columns, rows: Vec::new() };
        for record in csv_reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::LedgerSchema(format!("{}: bad number {s:?}", path.display()))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}

/// Fixed-width scientific notation, exact on reparse.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
