//! Report rows and their CSV/JSON encodings.
//!
//! Every command emits the same columns in the same order, so runs are
//! trivially diffable; with `--no-timing` the wall-time column is pinned to
//! zero and two runs of the same spec are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub std_error: f64,
    pub n: u64,
    pub pass: bool,
    pub wall_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn render(rows: &[ReportRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("id,lhs,rhs,residual,std_error,n,pass,wall_ms,seed\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.id, r.lhs, r.rhs, r.residual, r.std_error, r.n, r.pass, r.wall_ms, r.seed
                ));
            }
            out
        }
        Format::Json => {
            let mut out = serde_json::to_string_pretty(rows).expect("rows serialize");
            out.push('\n');
            out
        }
    }
}

/// Write the report atomically: temp file in the target directory, then
/// rename over the destination.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
        )),
        None => Path::new(&format!(
            ".{}.tmp",
            path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
        ))
        .to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)
            .with_context(|| format!("cannot create temporary file {}", tmp.display()))?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move report into place at {}", path.display()))?;
    Ok(())
}
