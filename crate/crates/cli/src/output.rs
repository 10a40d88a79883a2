use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;
use tlsecho::io::Report;

use crate::args::Format;

/// Column-oriented payload for `--format csv`.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

pub struct Output {
    pub report: Report,
    /// Lines for standard output.
    pub summary: Vec<String>,
    pub table: Option<Table>,
    /// The command already wrote its own file to `--out`.
    pub wrote_out: bool,
}

impl Output {
    pub fn new(kind: &str, results: Value) -> Self {
        Output {
            report: Report::new(kind, results),
            summary: Vec::new(),
            table: None,
            wrote_out: false,
        }
    }

    pub fn line(mut self, s: impl Into<String>) -> Self {
        self.summary.push(s.into());
        self
    }

    pub fn assume(mut self, name: &str, value: f64, unit: &str) -> Self {
        self.report = self.report.assume(name, value, unit);
        self
    }

    pub fn table(mut self, header: Vec<&'static str>, rows: Vec<Vec<Value>>) -> Self {
        self.table = Some(Table { header, rows });
        self
    }

    pub fn finish(self, out: Option<&Path>, format: Format) -> Result<()> {
        if let Some(path) = out.filter(|_| !self.wrote_out) {
            let text = match format {
                Format::Json => self.report.to_json(),
                Format::Csv => to_csv(&self)?,
            };
            fs::write(path, text).with_context(|| format!("writing --out {}", path.display()))?;
        }
        let mut stdout = io::stdout().lock();
        for l in &self.summary {
            // A closed pipe (e.g. `| head`) is not an error.
            if writeln!(stdout, "{l}").is_err() {
                break;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn to_csv(out: &Output) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(t) = &out.table {
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row.iter().map(cell))?;
        }
    } else {
        let Value::Object(map) = &out.report.results else {
            bail!("--format csv is not available for {}", out.report.kind);
        };
        w.write_record(["key", "value"])?;
        for (k, v) in map {
            if v.is_object() || v.is_array() {
                continue;
            }
            w.write_record([k.as_str(), &cell(v)])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes an `x,y` CSV curve for external plotting.
pub fn emit_curve(path: &Path, x_name: &str, y_name: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing --emit-curve {}", path.display()))?;
    w.write_record([x_name, y_name])?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
