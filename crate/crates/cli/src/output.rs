use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use condmean::numerics::format_number;
use condmean::EstimateWithError;
use serde::Serialize;

use crate::error::CliError;

/// Version of every JSON document `cmean` writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn factor(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LN_2,
        }
    }

    /// Converts an entropy, rate or log-quantity from nats.
    pub fn log(self, e: EstimateWithError) -> EstimateWithError {
        let f = self.factor();
        EstimateWithError::new(e.value / f, e.abs_error / f, e.method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// A CSV table whose computed columns each carry an `<name>_abs_error` sibling.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One cell group of a row: a grid coordinate, or a computed value with its error.
pub enum Cell {
    Key(&'static str, f64),
    Value(&'static str, Option<EstimateWithError>),
}

impl Table {
    pub fn new() -> Self {
        Self {
            header: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<Cell>) {
        let mut header = Vec::new();
        let mut row = Vec::new();
        for cell in cells {
            match cell {
                Cell::Key(name, v) => {
                    header.push(name.to_string());
                    row.push(format_number(v));
                }
                Cell::Value(name, e) => {
                    header.push(name.to_string());
                    header.push(format!("{name}_abs_error"));
                    match e {
                        Some(e) => row.extend([format_number(e.value), format_number(e.abs_error)]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
            }
        }
        if self.header.is_empty() {
            self.header = header;
        }
        debug_assert_eq!(self.header.len(), row.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn write(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON document with the schema version and units alongside the payload.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub kind: &'a str,
    pub units: Units,
    #[serde(flatten)]
    pub payload: T,
}

pub fn write_json(value: &impl Serialize, out: impl Write) -> Result<(), CliError> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Writes to the named file, or to standard output when there is none.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(p.to_path_buf(), e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Io(path.clone(), e))?;
    Ok((path, BufWriter::new(file)))
}
