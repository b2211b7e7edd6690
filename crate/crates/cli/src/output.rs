use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::{Command, Format};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "MALLOWS_OUTPUT_DIR";

/// Self-describing JSON output: the full configuration next to the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<R> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub invocation: Command,
    pub result: R,
}

/// A result that can also be written as a flat CSV table.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub fn resolve_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let p = resolve_path(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit<R: Serialize + Tabular>(invocation: &Command, result: R, format: Format, path: Option<&Path>) -> io::Result<()> {
    let mut out = sink(path)?;
    match format {
        Format::Json => {
            let envelope = Envelope { schema_version: SCHEMA_VERSION, invocation: invocation.clone(), result };
            serde_json::to_writer_pretty(&mut out, &envelope)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(result.header())?;
            for row in result.rows() {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    out.flush()
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
