//! Download, verification and extraction of the benchmark archive.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::manifest::{DatasetManifest, Manifest};

pub const CACHE_ENV: &str = "GOMKIT_CACHE";
const RECORDED: &str = "checksums.json";

/// Cache root: `$GOMKIT_CACHE`, else `~/.cache/gomkit`, else `.gomkit-cache`.
pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return dir.into();
    }
    match std::env::var_os("HOME") {
        Some(home) => Path::new(&home).join(".cache").join("gomkit"),
        None => PathBuf::from(".gomkit-cache"),
    }
}

pub fn archives_dir(cache: &Path) -> PathBuf {
    cache.join("archives")
}

pub fn extracted_dir(cache: &Path) -> PathBuf {
    cache.join("extracted")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchReport {
    pub root: PathBuf,
    pub downloaded: Vec<String>,
    pub cached: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(Error::io(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(Error::io(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn recorded_checksums(cache: &Path) -> Result<BTreeMap<String, String>> {
    let path = cache.join(RECORDED);
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::format(&path)(e.to_string())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(Error::io(&path)(e)),
    }
}

fn save_checksums(cache: &Path, sums: &BTreeMap<String, String>) -> Result<()> {
    let text = serde_json::to_string_pretty(sums).expect("string map serialises");
    write_atomic(&cache.join(RECORDED), text.as_bytes())
}

fn purge(cache: &Path, name: &str) -> Result<()> {
    let archive = archives_dir(cache).join(name);
    if archive.exists() {
        std::fs::remove_file(&archive).map_err(Error::io(&archive))?;
    }
    let tree = extracted_dir(cache).join(name);
    if tree.exists() {
        std::fs::remove_dir_all(&tree).map_err(Error::io(&tree))?;
    }
    let mut sums = recorded_checksums(cache)?;
    if sums.remove(name).is_some() {
        save_checksums(cache, &sums)?;
    }
    Ok(())
}

/// Checks a cached archive against its expected digest, purging it on mismatch.
pub fn verify_cached(cache: &Path, name: &str, expected: &str) -> Result<()> {
    let path = archives_dir(cache).join(name);
    let actual = sha256_file(&path)?;
    if actual.eq_ignore_ascii_case(expected) {
        return Ok(());
    }
    purge(cache, name)?;
    Err(Error::Checksum { path, expected: expected.to_string(), actual })
}

fn extract(cache: &Path, name: &str) -> Result<()> {
    let archive = archives_dir(cache).join(name);
    let target = extracted_dir(cache).join(name);
    if target.exists() {
        return Ok(());
    }
    let parent = extracted_dir(cache);
    std::fs::create_dir_all(&parent).map_err(Error::io(&parent))?;
    let staging = tempfile::tempdir_in(&parent).map_err(Error::io(&parent))?;
    let is_zip = name.to_ascii_lowercase().ends_with(".zip");
    if is_zip {
        let file = File::open(&archive).map_err(Error::io(&archive))?;
        let mut zip = zip::ZipArchive::new(file).map_err(|e| Error::format(&archive)(e.to_string()))?;
        zip.extract(staging.path()).map_err(|e| Error::format(&archive)(e.to_string()))?;
    } else {
        let copy = staging.path().join(name);
        std::fs::copy(&archive, &copy).map_err(Error::io(&copy))?;
    }
    let staged = staging.keep();
    std::fs::rename(&staged, &target).map_err(Error::io(&target))
}

#[derive(Deserialize)]
struct RecordLinks {
    #[serde(rename = "self")]
    download: String,
}

#[derive(Deserialize)]
struct RecordFile {
    key: String,
    size: u64,
    links: RecordLinks,
}

#[derive(Deserialize)]
struct Record {
    files: Vec<RecordFile>,
}

fn download(cache: &Path, file: &RecordFile, expected: Option<&String>) -> Result<String> {
    let dir = archives_dir(cache);
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let target = dir.join(&file.key);
    log::info!("downloading {} ({} bytes)", file.key, file.size);
    let resp = ureq::get(&file.links.download).call().map_err(|e| Error::Network(format!("{}: {e}", file.key)))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(Error::io(&dir))?;
    let written = io::copy(&mut resp.into_reader(), &mut tmp).map_err(|e| Error::Network(format!("{}: {e}", file.key)))?;
    if written != file.size {
        return Err(Error::Network(format!("{}: expected {} bytes, received {written}", file.key, file.size)));
    }
    let actual = sha256_file(tmp.path())?;
    if let Some(exp) = expected {
        if !actual.eq_ignore_ascii_case(exp) {
            purge(cache, &file.key)?;
            return Err(Error::Checksum { path: target, expected: exp.clone(), actual });
        }
    }
    tmp.persist(&target).map_err(|e| Error::io(&target)(e.error))?;
    Ok(actual)
}

/// Makes the benchmark available under `<cache>/extracted`.
///
/// A cache whose archives all carry a recorded checksum is verified and reused
/// without network access; otherwise the record's file list is downloaded.
pub fn fetch(manifest: &Manifest, cache: &Path) -> Result<FetchReport> {
    let mut sums = recorded_checksums(cache)?;
    for (k, v) in &manifest.checksums {
        sums.insert(k.clone(), v.clone());
    }
    let mut report = FetchReport { root: extracted_dir(cache), ..Default::default() };
    let cached: Vec<&String> = sums.keys().filter(|k| archives_dir(cache).join(k).is_file()).collect();
    if !sums.is_empty() && cached.len() == sums.len() {
        for (name, expected) in &sums {
            verify_cached(cache, name, expected)?;
            extract(cache, name)?;
            report.cached.push(name.clone());
        }
        return Ok(report);
    }

    let resp = ureq::get(&manifest.record_url)
        .call()
        .map_err(|e| Error::Network(format!("{}: {e}", manifest.record_url)))?;
    let record: Record = serde_json::from_reader(resp.into_reader())
        .map_err(|e| Error::Network(format!("{}: {e}", manifest.record_url)))?;
    for file in &record.files {
        let path = archives_dir(cache).join(&file.key);
        if let (true, Some(expected)) = (path.is_file(), sums.get(&file.key)) {
            verify_cached(cache, &file.key, expected)?;
            report.cached.push(file.key.clone());
        } else {
            let digest = download(cache, file, sums.get(&file.key))?;
            let mut recorded = recorded_checksums(cache)?;
            recorded.insert(file.key.clone(), digest.clone());
            save_checksums(cache, &recorded)?;
            sums.insert(file.key.clone(), digest);
            report.downloaded.push(file.key.clone());
        }
        extract(cache, &file.key)?;
    }
    Ok(report)
}

/// Directory holding a dataset inside an extracted tree (shallowest match by name).
pub fn locate_dataset(root: &Path, dataset: &DatasetManifest) -> Option<PathBuf> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_dir() && e.file_name().to_string_lossy().eq_ignore_ascii_case(&dataset.directory))
        .min_by_key(|e| e.depth())
        .map(|e| e.into_path())
}
