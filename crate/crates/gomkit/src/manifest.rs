//! Benchmark archive description and the file-to-gesture-class mapping.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../data/manifest.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPattern {
    pub label: String,
    /// Name patterns; `*` stands for a run of digits. Defaults to the label itself.
    #[serde(default)]
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// Directory name searched for inside the extracted archive.
    pub directory: String,
    pub classes: Vec<ClassPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub doi: String,
    pub record_url: String,
    pub total_bytes: u64,
    pub total_frames: u64,
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
    pub datasets: Vec<DatasetManifest>,
}

impl Manifest {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled manifest parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for d in &m.datasets {
            d.matchers()?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetManifest> {
        self.datasets.iter().find(|d| d.name.eq_ignore_ascii_case(name)).ok_or_else(|| {
            let known: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
            Error::Manifest(format!("unknown dataset {name}; known: {}", known.join(", ")))
        })
    }
}

fn pattern_regex(pattern: &str) -> Result<Regex> {
    let body: Vec<String> = pattern.split('*').map(regex::escape).collect();
    // a label matches as a whole token: not glued to letters before, nor to digits after
    Regex::new(&format!("(?i)(?:^|[^A-Za-z0-9]){}(?:$|[^0-9])", body.join("[0-9]+")))
        .map_err(|e| Error::Manifest(format!("pattern {pattern:?}: {e}")))
}

impl DatasetManifest {
    fn matchers(&self) -> Result<Vec<(&str, Vec<Regex>)>> {
        self.classes
            .iter()
            .map(|c| {
                let patterns: Vec<&str> = if c.patterns.is_empty() {
                    vec![c.label.as_str()]
                } else {
                    c.patterns.iter().map(String::as_str).collect()
                };
                Ok((c.label.as_str(), patterns.into_iter().map(pattern_regex).collect::<Result<_>>()?))
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.label.as_str()).collect()
    }

    /// Vocabulary class named by `name` (a file stem or an annotation label).
    ///
    /// `Ok(None)` for names outside the vocabulary; an error when several classes match.
    pub fn classify(&self, name: &str) -> Result<Option<&str>> {
        let hits: Vec<&str> = self
            .matchers()?
            .into_iter()
            .filter(|(_, res)| res.iter().any(|r| r.is_match(name)))
            .map(|(label, _)| label)
            .collect();
        match hits.as_slice() {
            [] => Ok(None),
            [one] => Ok(Some(one)),
            many => Err(Error::Manifest(format!("{name:?} matches several classes: {}", many.join(", ")))),
        }
    }
}
