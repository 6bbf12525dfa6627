//! Report rendering: CSV tables behind a provenance header, or one JSON
//! document with full-precision values.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    /// Effective settings, defaults included, in insertion order.
    pub config: Vec<(String, String)>,
    pub inputs: Vec<Input>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            toolkit: "lbeval".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(Input {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# {} {}", self.toolkit, self.version),
            format!("# command: {}", self.command),
        ];
        lines.extend(self.config.iter().map(|(k, v)| format!("# {k}: {v}")));
        lines.extend(self.inputs.iter().map(|i| format!("# input: {} sha256={}", i.path, i.sha256)));
        lines
    }

    fn to_json(&self) -> Value {
        let config: serde_json::Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        serde_json::json!({
            "toolkit": self.toolkit,
            "version": self.version,
            "command": self.command,
            "config": config,
            "inputs": self.inputs,
        })
    }
}

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, header: impl IntoIterator<Item = S>) -> Self {
        Table {
            name: name.into(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct Report {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    pub structured: Value,
}

/// Rates and scores in CSV cells.
pub fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

/// Proportions shown as percentages with one decimal.
pub fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

pub fn emit(report: &Report, format: Format, out_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let command = &report.provenance.command;
    match (format, out_dir) {
        (Format::Json, None) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_json(report, &mut lock)?;
            Ok(Vec::new())
        }
        (Format::Json, Some(dir)) => {
            let path = dir.join(format!("{command}.json"));
            let mut buf = Vec::new();
            write_json(report, &mut buf)?;
            write_file(&path, &buf)?;
            Ok(vec![path])
        }
        (Format::Csv, None) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv_stream(report, &mut lock)?;
            Ok(Vec::new())
        }
        (Format::Csv, Some(dir)) => {
            let mut written = Vec::new();
            for table in &report.tables {
                let path = dir.join(format!("{command}-{}.csv", table.name));
                let mut buf = Vec::new();
                for line in report.provenance.header_lines() {
                    writeln!(buf, "{line}")?;
                }
                table.write_csv(&mut buf)?;
                write_file(&path, &buf)?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<W: Write>(report: &Report, out: &mut W) -> Result<()> {
    let doc = serde_json::json!({
        "provenance": report.provenance.to_json(),
        "report": report.structured,
    });
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_csv_stream<W: Write>(report: &Report, out: &mut W) -> Result<()> {
    for line in report.provenance.header_lines() {
        writeln!(out, "{line}")?;
    }
    for (i, table) in report.tables.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# table: {}", table.name)?;
        table.write_csv(&mut *out)?;
    }
    Ok(())
}
