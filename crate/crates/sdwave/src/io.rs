//! Output files. CSV files start with a `# config_sha256=<hex>` comment
//! line; JSON files are objects whose `config_sha256` member carries the
//! same hash.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use sdwave_core::State;

use crate::error::CliError;

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn io_err(path: &Path, context: &str, source: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), context: context.to_string(), source }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> CsvTable {
        CsvTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn write_csv(path: &Path, hash: &str, table: &CsvTable) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, "create", e))?;
    let mut w = BufWriter::new(file);
    let mut out = || -> std::io::Result<()> {
        writeln!(w, "# config_sha256={hash}")?;
        writeln!(w, "{}", table.columns.join(","))?;
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    out().map_err(|e| io_err(path, "write", e))
}

pub fn write_json(path: &Path, hash: &str, body: Map<String, Value>) -> Result<(), CliError> {
    let mut obj = Map::new();
    obj.insert("config_sha256".into(), Value::String(hash.to_string()));
    obj.extend(body);
    let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values serialize");
    fs::write(path, text + "\n").map_err(|e| io_err(path, "write", e))
}

pub fn state_json(s: &State) -> Value {
    json!({ "u": s.u.coeffs(), "ut": s.ut.coeffs() })
}

/// Non-finite numbers become `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, "create directory", e))
}

pub fn output_path(dir: &Path, run_id: &str, member: Option<usize>, kind: &str, ext: &str) -> PathBuf {
    match member {
        Some(m) => dir.join(format!("{run_id}.m{m}.{kind}.{ext}")),
        None => dir.join(format!("{run_id}.{kind}.{ext}")),
    }
}

/// Parses a CSV written by [`write_csv`]: the hash and the table.
pub fn read_csv(path: &Path) -> Result<(String, CsvTable), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, "read", e))?;
    let bad = |m: &str| CliError::Numerics { path: path.to_path_buf(), message: m.to_string() };
    let mut lines = text.lines();
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("# config_sha256="))
        .ok_or_else(|| bad("missing config hash line"))?
        .to_string();
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    let mut table = CsvTable { columns: header.split(',').map(String::from).collect(), rows: Vec::new() };
    for line in lines {
        let row = line.split(',').map(|c| c.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("bad number"))?;
        table.rows.push(row);
    }
    Ok((hash, table))
}
