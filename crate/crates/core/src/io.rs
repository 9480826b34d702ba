//! Small helpers shared by the text record formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write to a sibling temp file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::format(path, "not a file path"))?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Split a record line into whitespace-separated fields, skipping blank lines and `#` comments.
pub(crate) fn record_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

pub(crate) fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 =
        field.parse().map_err(|_| Error::format(path, format!("line {line}: expected a number, got {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::format(path, format!("line {line}: non-finite value")));
    }
    Ok(v)
}

pub(crate) fn parse_usize(path: &Path, line: usize, field: &str) -> Result<usize> {
    field.parse().map_err(|_| Error::format(path, format!("line {line}: expected an integer, got {field:?}")))
}
