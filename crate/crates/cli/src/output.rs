//! Report tables and their CSV / JSON encodings.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Int(x) => x.to_string(),
            Cell::Real(x) => real_text(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(x) => json!(x),
            Cell::Real(x) if x.is_finite() => json!(x),
            Cell::Real(_) => Value::Null,
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e15)`.
pub fn real_text(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// a stated property of the process or kernel
    Property,
    /// agreement between independent numerical methods
    Tolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn property(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            kind: CheckKind::Property,
            pass,
            detail: detail.into(),
        }
    }

    pub fn tolerance(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            kind: CheckKind::Tolerance,
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Report {
            columns: columns.to_vec(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// 0 when every check passes, 3 if an agreement check failed, else 1.
    pub fn exit_code(&self) -> i32 {
        let failed = |k| self.checks.iter().any(|c| c.kind == k && !c.pass);
        if failed(CheckKind::Tolerance) {
            3
        } else if failed(CheckKind::Property) {
            1
        } else {
            0
        }
    }

    /// Plain-text check summary.
    pub fn summary(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{:<4}  {:<width$}  {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        s
    }
}

pub fn program_version() -> String {
    format!("tree-stable-cli {} (library {})", env!("CARGO_PKG_VERSION"), tree_stable::VERSION)
}

pub fn write_report(out: &mut dyn Write, cfg: &ExperimentConfig, report: &Report) -> std::io::Result<()> {
    match cfg.format {
        Format::Csv => write_csv(out, cfg, report),
        Format::Json => write_json(out, cfg, report),
    }
}

fn write_csv(out: &mut dyn Write, cfg: &ExperimentConfig, report: &Report) -> std::io::Result<()> {
    writeln!(out, "# {}", program_version())?;
    for (k, v) in &cfg.echo {
        writeln!(out, "# {k} = {v}")?;
    }
    for c in &report.checks {
        writeln!(out, "# check {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.columns)?;
    for row in &report.rows {
        w.write_record(row.iter().map(Cell::text))?;
    }
    w.flush()
}

fn write_json(out: &mut dyn Write, cfg: &ExperimentConfig, report: &Report) -> std::io::Result<()> {
    let config: Map<String, Value> = cfg.echo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let rows: Vec<Value> = report.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "kind": match c.kind { CheckKind::Property => "property", CheckKind::Tolerance => "tolerance" },
                "pass": c.pass,
                "detail": c.detail,
            })
        })
        .collect();
    let doc = json!({
        "header": { "version": program_version(), "config": config },
        "columns": report.columns,
        "rows": rows,
        "checks": checks,
    });
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)
}
