//! CSV and JSON serialization.
//!
//! Floats carry 17 significant digits so outputs round-trip bit-exactly;
//! CSV fields are quoted RFC-4180 style when they contain separators.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut buf = String::new();
    buf.push_str(&header.iter().map(|h| csv_escape(h)).collect::<Vec<_>>().join(","));
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(","));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}
