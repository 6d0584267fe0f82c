//! File plumbing shared by every persisted format: JSON with full-precision
//! floats, and atomic write-then-rename so partial output never lands under
//! a final path.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// JSON formatter printing every finite f64 with 17 significant digits
/// (`{:.16e}`), enough to round-trip any double exactly.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON bytes with full-precision floats and a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser).map_err(|e| Error::MalformedFile {
        path: "<serialize>".into(),
        detail: e.to_string(),
    })?;
    buf.push(b'\n');
    Ok(buf)
}

/// Write bytes to `path` atomically: a temp file in the same directory is
/// flushed and then renamed over the destination.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Serialize and atomically write one JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &to_json_bytes(value)?)
}

/// Read and parse one JSON document into a typed value.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e))
}

/// Read a JSON document as a generic value, for schema checks that want to
/// produce named errors before typed parsing.
pub fn read_json_value(path: &Path) -> Result<serde_json::Value> {
    read_json(path)
}
