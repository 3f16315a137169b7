//! Run configuration, read from TOML and stored next to every stage output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gomkit_core::bvh::SensorMap;
use gomkit_core::gom::{default_sensor_set, ChainSpec, GomTopology};
use gomkit_core::preprocess::DEFAULT_ORDER;
use gomkit_core::recognition::{CvConfig, HmmConfig, HmmTopology};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Manifest};

pub const CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Fixed cutoff for every channel; chosen per channel from the spectrum when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_hz: Option<f64>,
    /// Unwrap angle discontinuities before filtering (otherwise after).
    #[serde(default = "yes")]
    pub unwrap_first: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, cutoff_hz: None, unwrap_first: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DexterityConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl Default for DexterityConfig {
    fn default() -> Self {
        Self { threshold: gomkit_core::dexterity::DEFAULT_THRESHOLD, top_k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmSettings {
    #[serde(default)]
    pub topology: HmmTopology,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for HmmSettings {
    fn default() -> Self {
        let cv = CvConfig::default();
        Self {
            topology: cv.topology,
            states: cv.n_states,
            folds: cv.folds,
            seed: cv.seed,
            max_iter: cv.hmm.max_iter,
            tolerance: cv.hmm.tolerance,
        }
    }
}

impl HmmSettings {
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            n_states: self.states,
            topology: self.topology,
            folds: self.folds,
            seed: self.seed,
            hmm: HmmConfig { max_iter: self.max_iter, tolerance: self.tolerance, ..HmmConfig::default() },
        }
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}
fn yes() -> bool {
    true
}
fn default_threshold() -> f64 {
    gomkit_core::dexterity::DEFAULT_THRESHOLD
}
fn default_states() -> usize {
    CvConfig::default().n_states
}
fn default_folds() -> usize {
    CvConfig::default().folds
}
fn default_max_iter() -> usize {
    HmmConfig::default().max_iter
}
fn default_tolerance() -> f64 {
    HmmConfig::default().tolerance
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: String,
    /// Recordings of the dataset; the fetch cache is searched when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Alternative manifest file; the bundled one otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Sensor labels to model; the 18 default sensors when empty.
    #[serde(default)]
    pub sensors: Vec<String>,
    /// Gesture classes to process; the whole vocabulary when empty.
    #[serde(default)]
    pub gestures: Vec<String>,
    /// Extra BVH joint names per sensor label, tried before the built-in ones.
    #[serde(default)]
    pub sensor_map: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<ChainSpec>,
    #[serde(default)]
    pub dexterity: DexterityConfig,
    #[serde(default)]
    pub hmm: HmmSettings,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line replacements applied on top of a loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub gestures: Option<Vec<String>>,
    pub sensors: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let full = std::path::absolute(path).map_err(Error::io(path))?;
        let base = full.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(d) = o.dataset {
            self.dataset = d;
        }
        if let Some(g) = o.gestures {
            self.gestures = g;
        }
        if let Some(s) = o.sensors {
            self.sensors = s;
        }
        if let Some(out) = o.out_dir {
            // given on the command line, so relative to the working directory
            self.out_dir = std::path::absolute(&out).unwrap_or(out);
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_path(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.data_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn manifest(&self) -> Result<Manifest> {
        match &self.manifest {
            Some(p) => Manifest::load(&self.resolve(p)),
            None => Ok(Manifest::builtin()),
        }
    }

    pub fn sensor_set(&self) -> Vec<String> {
        if self.sensors.is_empty() {
            default_sensor_set()
        } else {
            self.sensors.clone()
        }
    }

    pub fn chain_spec(&self) -> ChainSpec {
        self.chains.clone().unwrap_or_default()
    }

    pub fn sensor_map(&self) -> SensorMap {
        let mut map = SensorMap::default();
        for (sensor, names) in &self.sensor_map {
            let entry = map.candidates.entry(sensor.clone()).or_default();
            let mut merged = names.clone();
            merged.append(entry);
            *entry = merged;
        }
        map
    }

    pub fn topology(&self) -> Result<GomTopology> {
        GomTopology::from_chains(&self.sensor_set(), &self.chain_spec()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Gesture classes selected for this run, in vocabulary order.
    pub fn classes(&self, dataset: &DatasetManifest) -> Vec<String> {
        dataset
            .labels()
            .into_iter()
            .filter(|l| self.gestures.is_empty() || self.gestures.iter().any(|g| g == l))
            .map(str::to_string)
            .collect()
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let manifest = self.manifest()?;
        let dataset = manifest.dataset(&self.dataset).map_err(|e| Error::Config(e.to_string()))?;
        let labels = dataset.labels();
        if let Some(g) = self.gestures.iter().find(|g| !labels.contains(&g.as_str())) {
            return bad(format!("gesture {g} is not in the {} vocabulary ({})", dataset.name, labels.join(", ")));
        }
        let sensors = self.sensor_set();
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = sensors.iter().find(|s| !seen.insert(s.as_str())) {
            return bad(format!("sensor {dup} listed twice"));
        }
        self.topology()?;
        let f = &self.filter;
        if f.order == 0 {
            return bad("filter order must be at least 1".into());
        }
        if let Some(c) = f.cutoff_hz {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("filter cutoff {c} Hz must be positive"));
            }
        }
        let d = &self.dexterity;
        if !(d.threshold > 0.0 && d.threshold < 1.0) {
            return bad(format!("significance threshold {} must lie in (0, 1)", d.threshold));
        }
        if let Some(k) = d.top_k {
            if k == 0 || k > sensors.len() {
                return bad(format!("top_k {k} must lie in 1..={}", sensors.len()));
            }
        }
        let h = &self.hmm;
        if h.states == 0 {
            return bad("hmm states must be at least 1".into());
        }
        if h.folds < 2 {
            return bad("hmm folds must be at least 2".into());
        }
        if h.max_iter == 0 || h.tolerance.is_nan() || h.tolerance <= 0.0 {
            return bad("hmm max_iter and tolerance must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "dataset = \"APA\"\n";

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::from_toml(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(c.filter.order, 4);
        assert_eq!(c.hmm.states, 7);
        assert_eq!(c.hmm.folds, 10);
        assert_eq!(c.sensor_set().len(), 18);
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml(), Path::new("/tmp")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_settings() {
        let bad = [
            "dataset = \"XYZ\"",
            "dataset = \"APA\"\ngestures = [\"APA_9\"]",
            "dataset = \"APA\"\nsensors = [\"RA\", \"RA\"]",
            "dataset = \"APA\"\nsensors = [\"NOPE\"]",
            "dataset = \"APA\"\n[hmm]\nfolds = 1",
            "dataset = \"APA\"\n[dexterity]\nthreshold = 1.5",
            "dataset = \"APA\"\n[dexterity]\ntop_k = 19",
            "dataset = \"APA\"\n[filter]\ncutoff_hz = -2.0",
        ];
        for text in bad {
            let c = RunConfig::from_toml(text, Path::new(".")).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{text}");
        }
        assert!(RunConfig::from_toml("dataset = \"APA\"\nbogus = 1", Path::new(".")).is_err());
    }

    #[test]
    fn overrides_and_sensor_map() {
        let text = "dataset = \"APA\"\n[sensor_map]\nRA = [\"R_UpperArm\"]\n";
        let mut c = RunConfig::from_toml(text, Path::new("/base")).unwrap();
        c.apply(Overrides {
            dataset: Some("TVA".into()),
            gestures: Some(vec!["TVA_2".into()]),
            sensors: Some(vec!["RA".into(), "LA".into()]),
            out_dir: Some("/elsewhere".into()),
        });
        c.validate().unwrap();
        assert_eq!(c.out_path(), PathBuf::from("/elsewhere"));
        assert_eq!(c.sensor_map().candidates["RA"][0], "R_UpperArm");
        assert_eq!(c.sensor_map().candidates["RA"][1], "RightArm");
        let m = c.manifest().unwrap();
        assert_eq!(c.classes(m.dataset("TVA").unwrap()), ["TVA_2"]);
    }
}
