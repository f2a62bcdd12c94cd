//! Tabular results and their CSV / JSON renderings.

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A single table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(n) => json!(n),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| ((*c).to_owned(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Ordered key/value pairs used for both the run configuration and the summary.
#[derive(Debug, Clone, Default)]
pub struct Record(pub Vec<(String, Cell)>);

impl Record {
    pub fn set(&mut self, key: &str, value: impl Into<Cell>) {
        self.0.push((key.to_owned(), value.into()));
    }

    fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["key", "value"]);
        for (k, v) in &self.0 {
            t.push(vec![Cell::Text(k.clone()), v.clone()]);
        }
        t
    }

    fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), v.json())).collect())
    }

    /// `key=value` lines for standard output.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k}={}", v.csv());
        }
        out
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config: Record,
    pub tables: Vec<Table>,
    pub summary: Record,
}

impl Report {
    pub fn new(command: &'static str, config: Record) -> Self {
        Self { command, config, tables: Vec::new(), summary: Record::default() }
    }

    pub fn to_json(&self) -> String {
        let tables: Map<String, Value> = self.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
        let doc = json!({
            "config": self.config.to_json(),
            "tables": tables,
            "summary": self.summary.to_json(),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<name>.csv` per table plus `config.csv` and `summary.csv`, or a
    /// single `<command>.json`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut files: Vec<(String, String)> = Vec::new();
        match format {
            Format::Csv => {
                files.push(("config.csv".into(), self.config.to_table("config").to_csv()));
                for t in &self.tables {
                    files.push((format!("{}.csv", t.name), t.to_csv()));
                }
                files.push(("summary.csv".into(), self.summary.to_table("summary").to_csv()));
            }
            Format::Json => files.push((format!("{}.json", self.command), self.to_json())),
        }
        for (name, body) in files {
            let path = dir.join(&name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}
