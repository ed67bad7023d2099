//! CSV and JSON-lines writers. CSV files start with a `# schema=1` line.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::algorithms::{Algorithm, StepRow};
use crate::error::Result;

pub const SCHEMA_LINE: &str = "# schema=1";

/// "p15" for p = 1.5, "p20" for p = 2, "p125" for p = 1.25.
pub fn p_label(p: f64) -> String {
    let mut hundredths = (p * 100.0).round() as i64;
    if hundredths % 10 == 0 {
        hundredths /= 10;
    }
    format!("p{hundredths}")
}

/// `<out>/<id>/<algorithm>/<pXX>`.
pub fn experiment_dir(out: &Path, id: &str, algorithm: Algorithm, p: f64) -> PathBuf {
    out.join(id).join(algorithm.name()).join(p_label(p))
}

/// Writes `rows` as CSV after the schema line, creating parent directories.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line, replacing the file.
pub fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut file, it)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Appends one JSON object as a line.
pub fn append_json_line<T: Serialize>(path: &Path, item: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(item)?;
    line.push(b'\n');
    file.write_all(&line)?;
    Ok(())
}

/// Per-step rows of a single run.
pub fn write_step_rows(path: &Path, rows: &[StepRow]) -> Result<()> {
    write_csv(path, rows)
}
