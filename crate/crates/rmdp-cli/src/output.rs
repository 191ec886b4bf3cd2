//! Report writing: CSV rows or a JSON document, to a file or stdout.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn open_sink(out: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    match out {
        Some(path) => Ok(Box::new(File::create(path)?)),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{context}: {e}"))
}

/// Serialize `rows` as CSV with a header row.
pub fn write_csv<T: Serialize>(rows: &[T], out: Option<&PathBuf>) -> Result<(), CliError> {
    let sink = open_sink(out).map_err(|e| run_err("opening output", e))?;
    let mut writer = csv::Writer::from_writer(sink);
    for row in rows {
        writer.serialize(row).map_err(|e| run_err("writing csv", e))?;
    }
    writer.flush().map_err(|e| run_err("flushing csv", e))?;
    Ok(())
}

/// Serialize any document as pretty JSON.
pub fn write_json<T: Serialize>(doc: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let mut sink = open_sink(out).map_err(|e| run_err("opening output", e))?;
    serde_json::to_writer_pretty(&mut sink, doc).map_err(|e| run_err("writing json", e))?;
    sink.write_all(b"\n").map_err(|e| run_err("writing json", e))?;
    Ok(())
}

/// Friendly validation error for an unreadable or invalid input file.
pub fn file_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}
