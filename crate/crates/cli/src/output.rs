//! Output plumbing: format selection, deterministic number formatting, and
//! the CSV/JSON writers. Data files never carry time stamps; run metadata
//! goes to a `.meta.json` sidecar next to `--out`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where a command's data stream goes, plus the sidecar path when writing
/// to a file.
pub struct Sink {
    out: Option<PathBuf>,
    meta: Value,
}

impl Sink {
    pub fn new(out: Option<PathBuf>, meta: Value) -> Self {
        Self { out, meta }
    }

    /// Writes the finished payload, and the metadata sidecar when the
    /// destination is a file (stdout consumers get data only).
    pub fn write(&self, payload: &str) -> std::io::Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, payload)?;
                let sidecar = sidecar_path(path);
                fs::write(sidecar, format!("{:#}\n", self.meta))
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(payload.as_bytes())
            }
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Shortest round-trip decimal representation (Rust's `Display` for f64),
/// so identical flags yield byte-identical files across platforms.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// A rectangular table rendered as CSV or as a JSON array of row objects.
/// Cells are pre-formatted strings for CSV; the JSON path keeps the raw
/// values so numbers stay numbers (absent cells become null).
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.header.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| c.map(fmt_f64).unwrap_or_default())
                        .collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: serde_json::Map<String, Value> = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(&k, c)| (k.to_string(), json_number(*c)))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).expect("table serialization");
                s.push('\n');
                s
            }
        }
    }
}

/// JSON has no infinities; the marker survives as the same "-inf" literal
/// the CSV column carries.
pub fn json_number(v: Option<f64>) -> Value {
    match v {
        None => Value::Null,
        Some(x) if x.is_infinite() => Value::String(fmt_f64(x)),
        Some(x) => serde_json::json!(x),
    }
}
