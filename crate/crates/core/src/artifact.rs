//! Versioned artifact files. CSV outputs start with a `# cfair-format:` comment
//! line; JSON outputs carry a `format` field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_FORMAT_PREFIX: &str = "# cfair-format: ";

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Opens a CSV writer whose first line names `format` (e.g. `pairs/1`).
pub fn csv_writer(path: &Path, format: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    writeln!(w, "{CSV_FORMAT_PREFIX}{format}").map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

/// Opens a CSV reader after checking the format line against `format`.
pub fn csv_reader(path: &Path, format: &str) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut first = String::new();
    r.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let declared = first.trim_end().strip_prefix(CSV_FORMAT_PREFIX);
    if declared != Some(format) {
        return Err(Error::Data(format!(
            "{} is not a `{format}` artifact (first line: {:?})",
            path.display(),
            first.trim_end()
        )));
    }
    Ok(csv::Reader::from_reader(r))
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Fails unless a JSON document declares the expected format string.
pub fn check_format(found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "expected format `{expected}`, found `{found}`"
        )))
    }
}
