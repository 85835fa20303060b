//! Tabular reports with a provenance header, rendered as CSV or JSON.
//!
//! CSV: `# key=value` header lines (version, command, config schema, config hash, seed,
//! config), one column line, then rows. Floats use the shortest round-trip decimal; empty cells mean
//! "not applicable". JSON: `{"header": {...}, "columns": [...], "rows": [[...], ...]}`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{config_hash, ReportFormat, SCHEMA_VERSION};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => format!("{v}"),
            Cell::Float(v) => format!("{v}").to_lowercase(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(format!("{v}").to_lowercase()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new<C: Serialize>(command: &'static str, config: &C, seed: Option<u64>, columns: &[&'static str]) -> Self {
        Self {
            command,
            config_hash: config_hash(config),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# probcut {VERSION}");
        let _ = writeln!(out, "# command={}", self.command);
        let _ = writeln!(out, "# config_schema={SCHEMA_VERSION}");
        let _ = writeln!(out, "# config_sha256={}", self.config_hash);
        let _ = writeln!(out, "# seed={}", self.seed.map_or("none".to_string(), |s| s.to_string()));
        let _ = writeln!(out, "# config={}", self.config);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        let doc = json!({
            "header": {
                "version": VERSION,
                "command": self.command,
                "config_schema": SCHEMA_VERSION,
                "config_sha256": self.config_hash,
                "seed": self.seed,
                "config": self.config,
            },
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = Report::new("demo", &json!({"a": 1}), Some(7), &["x", "y", "note"]);
        r.push(vec![0.1.into(), Cell::Empty, "a,b".into()]);
        r.push(vec![f64::NAN.into(), 3usize.into(), true.into()]);
        let csv = r.render(ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], format!("# probcut {VERSION}"));
        assert_eq!(lines[4], "# seed=7");
        assert_eq!(lines[6], "x,y,note");
        assert_eq!(lines[7], "0.1,,\"a,b\"");
        assert_eq!(lines[8], "nan,3,true");
    }

    #[test]
    fn json_layout() {
        let mut r = Report::new("demo", &json!({}), None, &["x"]);
        r.push(vec![Cell::Float(2.5)]);
        let v: Value = serde_json::from_str(&r.render(ReportFormat::Json)).unwrap();
        assert_eq!(v["header"]["command"], "demo");
        assert_eq!(v["header"]["seed"], Value::Null);
        assert_eq!(v["rows"][0][0], 2.5);
    }
}
