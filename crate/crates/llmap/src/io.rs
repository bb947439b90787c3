//! Atomic writes and the JSON header sidecar every output file carries.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Command, full configuration and seed that produced an output file.
/// Written next to the file as `<file>.header.json`; no timestamps, so the
/// same invocation always yields the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
}

impl Header {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".header.json");
    PathBuf::from(name)
}

/// Write to a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::io(path))?;
    tmp.write_all(contents).map_err(Error::io(path))?;
    tmp.as_file().sync_all().map_err(Error::io(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e.error,
    })?;
    Ok(())
}

pub fn to_json_string(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// The artifact and its sidecar.
pub fn write_output(path: &Path, contents: &str, header: &Header) -> Result<()> {
    write_atomic(path, contents.as_bytes())?;
    write_atomic(&sidecar_path(path), to_json_string(header).as_bytes())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::io(path))
}
