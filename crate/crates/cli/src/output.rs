//! Row emitters. CSV files start with a `# psqf <table> v<version>` comment
//! line; JSON output is an array of objects with the same field names.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn schema_comment(table: &str) -> String {
    format!("# psqf {table} v{SCHEMA_VERSION}")
}

pub fn write_rows<T: Serialize>(
    rows: &[T],
    table: &str,
    format: Format,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            writeln!(w, "{}", schema_comment(table))?;
            let mut csv = csv::Writer::from_writer(&mut *w);
            for row in rows {
                csv.serialize(row)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Writes to `out`, or stdout when absent.
pub fn emit<T: Serialize>(
    rows: &[T],
    table: &str,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_rows(rows, table, format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_rows(rows, table, format, &mut w)?;
        }
    }
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(r: impl Read) -> Result<Vec<T>, CliError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let rows = reader.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn read_json<T: DeserializeOwned>(r: impl Read) -> Result<Vec<T>, CliError> {
    Ok(serde_json::from_reader(r)?)
}
