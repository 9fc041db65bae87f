use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

/// A rendered result in every output format. Tables are rounded; CSV and
/// JSON keep full precision.
pub struct Rendered {
    pub csv: String,
    pub json: Value,
    pub table: String,
}

impl Rendered {
    pub fn select(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv.clone(),
            Format::Table => self.table.clone(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("json values always serialize");
                s.push('\n');
                s
            }
        }
    }
}

/// Rounds to six significant digits for display.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if (1e-4..1e9).contains(&mag) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

/// Full-precision float for CSV cells: the shortest string that round-trips.
pub fn full(x: f64) -> String {
    format!("{x:?}")
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut l = String::new();
        for (k, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if k + 1 == cells.len() {
                l.push_str(cell);
            } else {
                let _ = write!(l, "{cell:<w$}  ");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

/// Writes to `out` when given, standard output otherwise.
pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(10.0 / 3.0), "3.33333");
        assert_eq!(sig6(0.1008), "0.1008");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(-1.0 / 6.0), "-0.166667");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(2.5e-7), "2.5e-7");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(3.0), "3");
    }

    #[test]
    fn table_alignment() {
        let t = table(&["a", "value"], &[vec!["long".into(), "1".into()]]);
        assert_eq!(t, "a     value\nlong  1\n");
    }
}
