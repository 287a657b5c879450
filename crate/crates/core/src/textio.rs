//! Whitespace-separated numeric tables with one header line.

use std::io::{BufRead, Write};

use crate::error::{Result, RotorError};

/// Nine significant digits in scientific notation; negative zero prints as zero.
pub fn format_number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

pub fn write_row<W: Write>(out: &mut W, fields: &[String]) -> std::io::Result<()> {
    writeln!(out, "{}", fields.join(" "))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|i| self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a header line followed by rows of numbers. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_table<R: BufRead>(input: R) -> Result<Table> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| RotorError::Parse { line: line_no, message: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match &header {
            None => header = Some(trimmed.split_whitespace().map(str::to_owned).collect()),
            Some(h) => {
                let row: Vec<f64> = trimmed
                    .split_whitespace()
                    .map(|f| f.parse::<f64>().map_err(|e| RotorError::Parse { line: line_no, message: format!("{f:?}: {e}") }))
                    .collect::<Result<_>>()?;
                if row.len() != h.len() {
                    return Err(RotorError::Parse { line: line_no, message: format!("expected {} fields, found {}", h.len(), row.len()) });
                }
                rows.push(row);
            }
        }
    }
    let header = header.ok_or(RotorError::Parse { line: 0, message: "missing header line".into() })?;
    Ok(Table { header, rows })
}
