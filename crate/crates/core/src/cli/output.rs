use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Result;

/// Prefix of the one line in every CSV that changes between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# asor-lab generated_at_unix=";

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV with a leading timestamp comment line.
pub fn write_csv<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut buf = format!("{TIMESTAMP_PREFIX}{secs}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w)?;
        w.flush()?;
    }
    write_atomic(path, &buf)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Empty string for `None`, so optional columns stay parseable.
pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Drops the timestamp line; what remains is identical across repeated runs.
pub fn strip_timestamp(csv_text: &str) -> String {
    csv_text
        .lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}
