//! Deterministic artifact output: fixed-form float text, CSV assembly,
//! JSON with the same float form, and atomic file writes.
//!
//! Identical data must yield byte-identical files, so every float is
//! printed in 17-significant-digit lowercase scientific notation and
//! negative zero is collapsed before formatting.

use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// 17-significant-digit lowercase scientific form. Negative zero prints
/// as positive zero so equal values always produce identical text.
pub fn format_float(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:.16e}")
}

/// CSV document under construction: a fixed header row, then data rows
/// appended one at a time, each checked against the column count.
#[derive(Debug, Clone)]
pub struct CsvWriter {
    columns: usize,
    text: String,
}

impl CsvWriter {
    pub fn new(columns: &[&str]) -> Self {
        CsvWriter {
            columns: columns.len(),
            text: format!("{}\n", columns.join(",")),
        }
    }

    /// Appends a row of preformatted cells.
    pub fn push_row(&mut self, cells: &[String]) -> Result<()> {
        if cells.len() != self.columns {
            return Err(Error::DimensionMismatch {
                left: self.columns,
                right: cells.len(),
            });
        }
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
        Ok(())
    }

    /// Appends a row of floats in the fixed format.
    pub fn push_floats(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|&v| format_float(v)).collect();
        self.push_row(&cells)
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

struct FixedFormatter;

impl serde_json::ser::Formatter for FixedFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(format_float(value).as_bytes())
    }
}

/// Serializes to compact JSON with floats in the fixed format. Integers
/// keep their plain decimal form.
pub fn to_json_fixed<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
}

/// Writes through a temporary file in the destination directory and
/// renames it over the target, so readers never observe partial
/// content and failures leave any existing file untouched.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut file = tempfile::NamedTempFile::new_in(dir)?;
    io::Write::write_all(&mut file, contents.as_bytes())?;
    file.persist(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}
