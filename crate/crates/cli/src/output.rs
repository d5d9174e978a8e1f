//! Report files: tables as CSV or JSON, summaries as JSON.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// A table cell: numbers keep full precision in both formats.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Leading `#` comment lines for CSV output; a `schema_version=` line is
    /// added unless the first comment already starts with one.
    pub comments: Vec<String>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
            comments: Vec::new(),
        }
    }
}

pub struct Sink {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    fn prepare(&self) -> Result<Option<&PathBuf>, CliError> {
        if let Some(d) = &self.dir {
            fs::create_dir_all(d).map_err(CliError::io(d))?;
        }
        Ok(self.dir.as_ref())
    }

    /// Write `table` as `<stem>.csv` or `<stem>.json` in the output directory.
    pub fn table(&self, stem: &str, table: &Table) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = self.prepare()? else {
            return Ok(None);
        };
        match self.format {
            Format::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut buf: Vec<u8> = Vec::new();
                if !table.comments.first().is_some_and(|c| c.starts_with("schema_version=")) {
                    writeln!(buf, "# schema_version={SCHEMA_VERSION}").map_err(CliError::io(&path))?;
                }
                for c in &table.comments {
                    writeln!(buf, "# {c}").map_err(CliError::io(&path))?;
                }
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(&table.header)?;
                    for row in &table.rows {
                        w.write_record(row.iter().map(Cell::csv))?;
                    }
                    w.flush().map_err(CliError::io(&path))?;
                }
                fs::write(&path, buf).map_err(CliError::io(&path))?;
                Ok(Some(path))
            }
            Format::Json => {
                let path = dir.join(format!("{stem}.json"));
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|r| {
                        let m: Map<String, Value> =
                            table.header.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect();
                        Value::Object(m)
                    })
                    .collect();
                let doc = serde_json::json!({ "comments": table.comments, "rows": rows });
                fs::write(&path, to_pretty(&doc)?).map_err(CliError::io(&path))?;
                Ok(Some(path))
            }
        }
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = self.prepare()? else {
            return Ok(None);
        };
        let path = dir.join(name);
        fs::write(&path, to_pretty(value)?).map_err(CliError::io(&path))?;
        Ok(Some(path))
    }
}

pub fn to_pretty(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
