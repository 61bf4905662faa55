//! CSV and NDJSON writers. Floats carry 17 significant digits in CSV and
//! the shortest round-tripping form in NDJSON; lines end in LF.

use std::io::Write;

use entwine_core::lattice::{ChargeField, LatticeSpec, Normalization};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Ndjson,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, Into::into),
            Cell::Text(s) => s.clone().into(),
        }
    }
}

/// Homogeneous rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }
}

pub const SLICE_HEADER: [&str; 7] = ["t", "z", "phi1", "phi2", "phi3", "phi4", "normalization"];

pub fn normalization_label(n: Normalization) -> &'static str {
    match n {
        Normalization::Raw => "raw",
        Normalization::Renormalized => "renormalized",
    }
}

/// Appends one row per site of `field` at physical time `t`.
pub fn push_slice(table: &mut Table, spec: &LatticeSpec, field: &ChargeField, t: f64) {
    for j in 0..field.n_sites() {
        table.push(vec![
            Cell::Float(t),
            Cell::Float(spec.position(j)),
            Cell::Float(field.phi1()[j]),
            Cell::Float(field.phi2()[j]),
            Cell::Float(field.phi3()[j]),
            Cell::Float(field.phi4()[j]),
            Cell::Text(normalization_label(field.normalization).into()),
        ]);
    }
}

pub fn emit<W: Write>(table: &Table, format: Format, sink: W) -> Result<(), CliError> {
    match format {
        Format::Csv => emit_csv(table, sink),
        Format::Ndjson => emit_table_ndjson(table, sink),
    }
}

fn emit_csv<W: Write>(table: &Table, sink: W) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn emit_table_ndjson<W: Write>(table: &Table, mut sink: W) -> Result<(), CliError> {
    for row in &table.rows {
        let mut line = String::from("{");
        for (i, (key, cell)) in table.header.iter().zip(row).enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&serde_json::to_string(key).expect("string key"));
            line.push(':');
            line.push_str(&cell.json().to_string());
        }
        line.push_str("}\n");
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

/// One JSON document per line.
pub fn emit_ndjson<W: Write, T: Serialize>(records: &[T], mut sink: W) -> Result<(), CliError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::Io(e.to_string()))?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}
