//! Machine-readable reports: one JSON document per command, plus a flat
//! CSV table for plotting.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Two-column `field,value` view of a JSON document, keys joined by dots.
    pub fn flattened(v: &Value) -> Self {
        let mut t = Table::new(["field", "value"]);
        flatten("", v, &mut t);
        t
    }
}

fn flatten(prefix: &str, v: &Value, t: &mut Table) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, t);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, t);
            }
        }
        Value::String(s) => t.push(vec![prefix.to_string(), s.clone()]),
        other => t.push(vec![prefix.to_string(), other.to_string()]),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub version: &'static str,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    /// SHA-256 of the serialised `results`; equal across replays of one config.
    pub payload_hash: String,
    pub results: Value,
    /// Wall-clock only, kept apart from the numeric payload.
    pub timings: Timings,
    #[serde(skip)]
    pub table: Table,
    /// Set when the command ran but found a violated invariant.
    #[serde(skip)]
    pub failure: Option<String>,
}

/// Starts the clock for a command.
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn finish(
        self,
        command: &'static str,
        config_hash: Option<String>,
        seed: Option<u64>,
        results: impl Serialize,
        table: Option<Table>,
    ) -> Result<Report> {
        let results = serde_json::to_value(results).map_err(|e| Error::Encode(e.to_string()))?;
        let payload = serde_json::to_string(&results).map_err(|e| Error::Encode(e.to_string()))?;
        let table = table.unwrap_or_else(|| Table::flattened(&results));
        Ok(Report {
            command,
            version: VERSION,
            config_hash,
            seed,
            payload_hash: hex::encode(Sha256::digest(payload.as_bytes())),
            results,
            timings: Timings {
                elapsed_seconds: self.0.elapsed().as_secs_f64(),
            },
            table,
            failure: None,
        })
    }
}

impl Report {
    pub fn write<W: Write>(&self, format: Format, mut out: W) -> Result<()> {
        let enc = |e: &dyn std::fmt::Display| Error::Encode(e.to_string());
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, self).map_err(|e| enc(&e))?;
                writeln!(out).map_err(|e| enc(&e))
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.table.headers).map_err(|e| enc(&e))?;
                for r in &self.table.rows {
                    w.write_record(r).map_err(|e| enc(&e))?;
                }
                w.flush().map_err(|e| enc(&e))
            }
        }
    }
}

/// Shortest round-trip decimal form, as in the JSON payload.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}
