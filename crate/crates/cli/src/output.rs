use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// A rectangular result table; cells are preformatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identity of one run: what was run, with which config text and seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub run_id: String,
}

impl RunInfo {
    pub fn new(command: &str, config_text: &str, seed: u64) -> Self {
        let config_sha256 = sha256_hex(config_text.as_bytes());
        let run_id = sha256_hex(format!("{command}\n{config_sha256}\n{seed}").as_bytes())[..12].to_string();
        Self { command: command.to_string(), config_sha256, seed, run_id }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    #[serde(flatten)]
    run: &'a RunInfo,
    config: serde_json::Value,
    started_unix: f64,
    wall_clock_seconds: f64,
    files: Vec<String>,
    rows: usize,
    version: &'static str,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_table<W: Write>(w: W, run: &RunInfo, table: &Table) -> Result<(), CliError> {
    let mut w = w;
    writeln!(w, "# command={} config_sha256={} seed={}", run.command, run.config_sha256, run.seed)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&table.columns).map_err(|e| CliError::Io(e.to_string()))?;
    for row in &table.rows {
        out.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Sibling path: `out.csv` + `points` -> `out.points.csv`.
pub fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = if suffix.is_empty() { format!("{stem}.{ext}") } else { format!("{stem}.{suffix}.{ext}") };
    out.with_file_name(name)
}

/// Writes the first table to `out` (or stdout), further tables next to it,
/// and a JSON metadata record `<stem>.json`.
pub fn emit(
    out: Option<&Path>,
    run: &RunInfo,
    config: serde_json::Value,
    tables: &[Table],
    started_unix: f64,
    wall_clock_seconds: f64,
) -> Result<Vec<PathBuf>, CliError> {
    let Some(out) = out else {
        let stdout = std::io::stdout();
        for t in tables {
            write_table(stdout.lock(), run, t)?;
        }
        return Ok(Vec::new());
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut files = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        let path = if i == 0 { out.to_path_buf() } else { sibling(out, t.name, "csv") };
        let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        write_table(std::io::BufWriter::new(f), run, t)?;
        files.push(path);
    }
    let meta_path = sibling(out, "", "json");
    let meta = Metadata {
        run,
        config,
        started_unix,
        wall_clock_seconds,
        files: files.iter().map(|p| p.display().to_string()).collect(),
        rows: tables.iter().map(|t| t.rows.len()).sum(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| io_err(&meta_path, e))?;
    files.push(meta_path);
    Ok(files)
}
