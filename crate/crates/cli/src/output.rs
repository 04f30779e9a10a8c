//! Tabular documents rendered as CSV or JSON with identical values.
//!
//! Numbers carry 12 significant digits in both formats: JSON holds the value
//! obtained by parsing the CSV text back, so the two agree bit for bit.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::args::Format;

pub const INSECURE: &str = "insecure";
pub const INVALID: &str = "invalid";
pub const NONE: &str = "none";

/// One output field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => {
                let s = format_number(*x);
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => json!(v),
                    _ => Value::String(s),
                }
            }
            Cell::Int(n) => json!(n),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::Int(n.into())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

/// Twelve significant digits in scientific notation; `inf`, `-inf`, `nan` otherwise.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.11e}")
    }
}

/// A named table without a primary role: overlays and side series.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Metadata, one main table and optional overlay tables.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub meta: Vec<(String, Cell)>,
    pub table: Table,
    pub overlays: Vec<(&'static str, Table)>,
}

impl Document {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            table: Table {
                columns,
                rows: Vec::new(),
            },
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.table.columns.len());
        self.table.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json()).expect("plain values");
                s.push('\n');
                s
            }
        }
    }

    /// `#` comment lines for metadata and overlays, then header and rows.
    fn csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            out.push_str(&format!("# {key},{}\n", value.csv()));
        }
        for (name, table) in &self.overlays {
            out.push_str(&format!("# {name},{}\n", table.columns.join(",")));
            for row in &table.rows {
                out.push_str(&format!("# {name},{}\n", join(row)));
            }
        }
        out.push_str(&self.table.columns.join(","));
        out.push('\n');
        for row in &self.table.rows {
            out.push_str(&join(row));
            out.push('\n');
        }
        out
    }

    fn json(&self) -> Value {
        let meta: Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), v.json()))
            .collect();
        let overlays: Map<String, Value> = self
            .overlays
            .iter()
            .map(|(name, t)| (name.to_string(), table_json(t)))
            .collect();
        let mut doc = table_json(&self.table);
        doc["meta"] = Value::Object(meta);
        doc["overlays"] = Value::Object(overlays);
        doc
    }

    /// Writes to `path`, or to stdout when no path is given.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<()> {
        let text = self.render(format);
        match path {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .context("writing to stdout")
            }
        }
    }
}

fn join(row: &[Cell]) -> String {
    row.iter().map(Cell::csv).collect::<Vec<_>>().join(",")
}

fn table_json(t: &Table) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
        .collect();
    json!({ "columns": t.columns, "rows": rows })
}
