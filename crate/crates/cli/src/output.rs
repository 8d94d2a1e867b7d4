//! Report files: `report.json`, CSV tables and optional SVG plots.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{Failure, Format, Outcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct Envelope<'a, P: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub parameters: &'a P,
    pub result: &'a R,
}

pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Writer {
    pub dir: PathBuf,
    pub format: Format,
    pub plot: bool,
    written: Vec<PathBuf>,
}

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> Failure {
    Failure::Output(format!("{}: {e}", path.display()))
}

impl Writer {
    pub fn new(dir: PathBuf, format: Format, plot: bool) -> Self {
        Writer {
            dir,
            format,
            plot,
            written: Vec::new(),
        }
    }

    /// Creates the output directory; called before any computation so an
    /// unusable directory fails fast.
    pub fn prepare(&self) -> Outcome<()> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let probe = self.dir.join(".rtgmi-write-test");
        fs::write(&probe, b"").map_err(|e| io_err(&self.dir, e))?;
        fs::remove_file(&probe).map_err(|e| io_err(&probe, e))
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Outcome<()> {
        if self.format == Format::Csv {
            return Ok(());
        }
        let path = self.dir.join("report.json");
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, table: &Table) -> Outcome<()> {
        if self.format == Format::Json {
            return Ok(());
        }
        let path = self.dir.join(format!("{}.csv", table.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| io_err(&path, e))?;
        w.write_record(&table.header)
            .map_err(|e| io_err(&path, e))?;
        for row in &table.rows {
            w.write_record(row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, content: &str) -> Outcome<()> {
        if !self.plot {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.svg"));
        fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}
