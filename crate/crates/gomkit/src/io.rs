//! Artifact reading and atomic writing.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::io(dir))?;
    tmp.write_all(bytes).map_err(Error::io(path))?;
    tmp.as_file().sync_all().map_err(Error::io(path))?;
    tmp.persist(path).map_err(|e| Error::io(path)(e.error))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialises");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads an artifact produced by `stage`, reporting a missing file by path.
pub fn read_artifact(path: &Path, stage: &'static str) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingArtifact { path: path.to_path_buf(), stage })
        }
        Err(e) => Err(Error::io(path)(e)),
    }
}

pub fn read_json<D: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<D> {
    let text = read_artifact(path, stage)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path)(e.to_string()))
}
