//! The staged pipeline: each stage reads the artifacts of earlier stages and
//! writes its own directory under the run's output directory.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use gomkit_core::bvh::{parse_bvh, write_bvh, Channel};
use gomkit_core::dexterity::{report_markdown, select_sensors, significance_counts, SensorRanking};
use gomkit_core::gom::{build_topology, fit, simulate, DescriptorFrames, GomError, GomTopology};
use gomkit_core::metrics::{evaluate, metrics_csv};
use gomkit_core::preprocess::{
    butterworth_lowpass, read_annotations, segment, select_cutoff, unwrap_discontinuities, FilterSpec, PreprocessError,
    UnwrapLog,
};
use gomkit_core::recognition::{cross_validate, CV_CSV_HEADER};
use gomkit_core::similarity::select_reference;
use gomkit_core::{DescriptorFramesF64, GestureMetricsF64, GomSystemF64, MotionClipF64, SkeletonF64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::config::{RunConfig, CONFIG_FILE};
use crate::error::{Error, Result};
use crate::fetch::{cache_dir, extracted_dir, locate_dataset};
use crate::io::{read_artifact, read_json, write_atomic, write_json};
use crate::manifest::DatasetManifest;
use crate::plot::{traces_svg, Trace};

pub const INDEX_VERSION: u32 = 1;
const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Fit,
    Simulate,
    Evaluate,
    Dexterity,
    Recognize,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Preprocess, Stage::Fit, Stage::Simulate, Stage::Evaluate, Stage::Dexterity, Stage::Recognize];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Fit => "fit",
            Stage::Simulate => "simulate",
            Stage::Evaluate => "evaluate",
            Stage::Dexterity => "dexterity",
            Stage::Recognize => "recognize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub class: String,
    /// Clip file, relative to the preprocess directory.
    pub clip: String,
    /// Recording the clip was cut from, relative to the data directory.
    pub source: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessIndex {
    pub version: u32,
    pub dataset: String,
    pub entries: Vec<ClipEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLog {
    pub channel: String,
    pub cutoff_hz: f64,
    /// False for channels left as recorded (positions, or angles already beyond ±180°).
    pub unwrapped: bool,
}

/// Everything done to one recording, enough to undo the unwrapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingLog {
    pub source: String,
    pub sample_rate_hz: f64,
    pub order: usize,
    pub unwrap_first: bool,
    pub channels: Vec<ChannelLog>,
    /// Non-trivial unwrap logs only.
    pub unwrap: Vec<UnwrapLog<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FittedClass {
    pub class: String,
    pub repetitions: usize,
    pub reference_index: usize,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitIndex {
    pub version: u32,
    pub dataset: String,
    pub classes: Vec<FittedClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvaluation {
    pub gesture: String,
    pub clips: Vec<String>,
    pub metrics: GestureMetricsF64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub stage: Stage,
    pub dir: PathBuf,
    /// Files written, relative to `dir`, sorted.
    pub files: Vec<String>,
}

struct Repetition {
    entry: ClipEntry,
    skeleton: SkeletonF64,
    clip: MotionClipF64,
}

struct Run<'a> {
    config: &'a RunConfig,
    dataset: DatasetManifest,
    out: PathBuf,
}

/// Collects the files a stage writes into its directory.
struct StageWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl StageWriter {
    /// Empties the stage directory (never another stage's) and records the config.
    fn begin(out: &Path, stage: Stage, config: &RunConfig) -> Result<Self> {
        let dir = out.join(stage.name());
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
        }
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let mut w = Self { dir, files: Vec::new() };
        w.write(CONFIG_FILE, config.to_toml().as_bytes())?;
        Ok(w)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn json<S: Serialize>(&mut self, rel: &str, value: &S) -> Result<()> {
        write_json(&self.dir.join(rel), value)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn finish(mut self, stage: Stage) -> StageOutput {
        self.files.sort();
        StageOutput { stage, dir: self.dir, files: self.files }
    }
}

/// Runs one stage after validating the configuration.
pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<StageOutput> {
    config.validate()?;
    let manifest = config.manifest()?;
    let run = Run { config, dataset: manifest.dataset(&config.dataset)?.clone(), out: config.out_path() };
    match stage {
        Stage::Preprocess => run.preprocess(),
        Stage::Fit => run.fit(),
        Stage::Simulate => run.simulate(),
        Stage::Evaluate => run.evaluate(),
        Stage::Dexterity => run.dexterity(),
        Stage::Recognize => run.recognize(),
    }
}

/// File-system-safe name for a path relative to the data directory.
fn artifact_key(rel: &Path) -> String {
    let stem = rel.with_extension("");
    stem.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("__")
}

fn rel_string(p: &Path) -> String {
    p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn read_bvh(path: &Path, stage: &'static str) -> Result<(SkeletonF64, MotionClipF64)> {
    let text = read_artifact(path, stage)?;
    parse_bvh(&text).map_err(|source| Error::Bvh { path: path.into(), source })
}


/// Cleaned series, cutoff used and unwrap log.
type Cleaned = (Vec<f64>, f64, Option<UnwrapLog<f64>>);

/// Unwraps (when the channel is an admissible angle) and low-passes one channel,
/// in the configured order. Returns the cutoff used and the unwrap log, if any.
fn clean_channel(
    series: Vec<f64>,
    rotation: bool,
    fs: f64,
    config: &RunConfig,
) -> Result<Cleaned, PreprocessError> {
    let f = &config.filter;
    let unwrap = |x: Vec<f64>| -> Result<(Vec<f64>, Option<UnwrapLog<f64>>), PreprocessError> {
        if rotation && x.iter().all(|v| v.abs() <= 180.0) {
            let (y, log) = unwrap_discontinuities(&x)?;
            Ok((y, Some(log)))
        } else {
            Ok((x, None))
        }
    };
    let lowpass = |x: &[f64]| -> Result<(Vec<f64>, f64), PreprocessError> {
        let cutoff = match f.cutoff_hz {
            Some(c) => c,
            None => select_cutoff(x, fs)?,
        };
        Ok((butterworth_lowpass(x, &FilterSpec::new(f.order, cutoff, fs)?)?, cutoff))
    };
    if f.unwrap_first {
        let (y, log) = unwrap(series)?;
        let (z, cutoff) = lowpass(&y)?;
        Ok((z, cutoff, log))
    } else {
        let (y, cutoff) = lowpass(&series)?;
        let (z, log) = unwrap(y)?;
        Ok((z, cutoff, log))
    }
}

/// Cleans every channel of a recording in place.
fn clean_recording(skeleton: &SkeletonF64, clip: &mut MotionClipF64, config: &RunConfig, source: &str) -> Result<RecordingLog> {
    let fs = clip.sample_rate_hz();
    let offsets = skeleton.channel_offsets();
    let mut log = RecordingLog {
        source: source.to_string(),
        sample_rate_hz: fs,
        order: config.filter.order,
        unwrap_first: config.filter.unwrap_first,
        channels: Vec::new(),
        unwrap: Vec::new(),
    };
    for (j, joint) in skeleton.joints().iter().enumerate() {
        for (k, channel) in joint.channels.iter().enumerate() {
            let col = offsets[j] + k;
            let name = format!("{}.{channel}", joint.name);
            let rotation = matches!(channel, Channel::Rotation(_));
            let (values, cutoff_hz, unwrap) = clean_channel(clip.column(col), rotation, fs, config)
                .map_err(|e| Error::Preprocess { context: format!("{source}, channel {name}"), source: e })?;
            clip.set_column(col, &values);
            log.channels.push(ChannelLog { channel: name.clone(), cutoff_hz, unwrapped: unwrap.is_some() });
            if let Some(u) = unwrap.filter(|u| !u.is_identity()) {
                log.unwrap.push(u.with_channel(name));
            }
        }
    }
    Ok(log)
}

fn simulation_csv(ids: &[String], frame_time: f64, rows: &[Vec<f64>]) -> String {
    let mut out = format!("frame,time_s,{}\n", ids.join(","));
    for (t, row) in rows.iter().enumerate() {
        let _ = write!(out, "{t},{:.6}", t as f64 * frame_time);
        for v in row {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

impl Run<'_> {
    fn data_dir(&self) -> Result<PathBuf> {
        if let Some(p) = self.config.data_path() {
            if !p.is_dir() {
                return Err(Error::Config(format!("data directory {} does not exist", p.display())));
            }
            return Ok(p);
        }
        let root = extracted_dir(&cache_dir());
        locate_dataset(&root, &self.dataset).ok_or_else(|| {
            Error::Config(format!(
                "no data_dir set and {} not found under {}; run `gomkit fetch` first",
                self.dataset.name,
                root.display()
            ))
        })
    }

    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    fn gom_error(context: String) -> impl FnOnce(GomError) -> Error {
        move |source| Error::Gom { context, source }
    }

    fn preprocess(&self) -> Result<StageOutput> {
        let data = self.data_dir()?;
        let classes = self.config.classes(&self.dataset);
        let mut files = Vec::new();
        for e in WalkDir::new(&data).sort_by_file_name() {
            let e = e.map_err(|err| Error::Io { path: data.clone(), source: err.into() })?;
            if e.file_type().is_file() && e.path().extension().is_some_and(|x| x.eq_ignore_ascii_case("bvh")) {
                files.push(e.into_path());
            }
        }
        let mut w = StageWriter::begin(&self.out, Stage::Preprocess, self.config)?;
        let results = files
            .par_iter()
            .map(|path| self.preprocess_file(&data, path, &classes, &w.dir))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::new();
        for (e, written) in results.into_iter().flatten() {
            entries.extend(e);
            w.files.extend(written);
        }
        if entries.is_empty() {
            return Err(Error::Config(format!(
                "no recordings of {} found under {}",
                classes.join(", "),
                data.display()
            )));
        }
        let rank = |c: &str| classes.iter().position(|x| x == c);
        entries.sort_by(|a, b| rank(&a.class).cmp(&rank(&b.class)).then_with(|| a.clip.cmp(&b.clip)));
        let index = PreprocessIndex { version: INDEX_VERSION, dataset: self.dataset.name.clone(), entries };
        w.json(INDEX_FILE, &index)?;
        Ok(w.finish(Stage::Preprocess))
    }

    /// Cleans and cuts one recording; `None` when it holds no selected gesture.
    fn preprocess_file(
        &self,
        data: &Path,
        path: &Path,
        classes: &[String],
        dir: &Path,
    ) -> Result<Option<(Vec<ClipEntry>, Vec<String>)>> {
        let rel = path.strip_prefix(data).unwrap_or(path);
        let source = rel_string(rel);
        let key = artifact_key(rel);
        let selected = |label: &str| -> Result<Option<String>> {
            Ok(self.dataset.classify(label)?.filter(|c| classes.iter().any(|x| x == c)).map(str::to_string))
        };
        let annotation_path = path.with_extension("csv");
        let annotations = if annotation_path.is_file() {
            let text = std::fs::read_to_string(&annotation_path).map_err(Error::io(&annotation_path))?;
            let a = read_annotations(&text)
                .map_err(|e| Error::Preprocess { context: annotation_path.display().to_string(), source: e })?;
            Some(a)
        } else {
            None
        };
        let whole_class = match &annotations {
            Some(a) => {
                if a.iter().map(|x| selected(&x.label)).collect::<Result<Vec<_>>>()?.iter().all(Option::is_none) {
                    return Ok(None);
                }
                None
            }
            None => match selected(&path.file_stem().unwrap_or_default().to_string_lossy())? {
                Some(c) => Some(c),
                None => return Ok(None),
            },
        };

        let (skeleton, mut clip) = read_bvh(path, "preprocess")?;
        let log = clean_recording(&skeleton, &mut clip, self.config, &source)?;
        let mut pieces = Vec::new();
        match (&annotations, whole_class) {
            (Some(a), _) => {
                let cut = segment(&clip, a)
                    .map_err(|e| Error::Preprocess { context: annotation_path.display().to_string(), source: e })?;
                for (i, (ann, (label, c))) in a.iter().zip(cut).enumerate() {
                    if let Some(class) = selected(&label)? {
                        pieces.push((class, format!("{key}__{i:03}"), ann.start_frame, ann.end_frame, c));
                    }
                }
            }
            (None, Some(class)) => {
                let n = clip.frame_count();
                pieces.push((class, key.clone(), 0, n, clip));
            }
            (None, None) => unreachable!("unannotated recordings without a class return early"),
        }

        let mut entries = Vec::new();
        let mut written = Vec::new();
        for (class, name, start_frame, end_frame, c) in pieces {
            let rel_clip = format!("clips/{class}/{name}.bvh");
            let text = write_bvh(&skeleton, &c).map_err(|e| Error::Bvh { path: dir.join(&rel_clip), source: e })?;
            write_atomic(&dir.join(&rel_clip), text.as_bytes())?;
            entries.push(ClipEntry { class, clip: rel_clip.clone(), source: source.clone(), start_frame, end_frame });
            written.push(rel_clip);
        }
        let rel_log = format!("logs/{key}.json");
        write_json(&dir.join(&rel_log), &log)?;
        written.push(rel_log);
        Ok(Some((entries, written)))
    }

    fn load_index(&self) -> Result<PreprocessIndex> {
        read_json(&self.stage_dir(Stage::Preprocess).join(INDEX_FILE), "preprocess")
    }

    fn load_fit_index(&self) -> Result<FitIndex> {
        read_json(&self.stage_dir(Stage::Fit).join(INDEX_FILE), "fit")
    }

    /// Selected classes with at least one clip, in vocabulary order.
    fn classes_in(&self, index: &PreprocessIndex) -> Result<Vec<String>> {
        let present: Vec<String> = self
            .config
            .classes(&self.dataset)
            .into_iter()
            .filter(|c| index.entries.iter().any(|e| &e.class == c))
            .collect();
        if present.is_empty() {
            return Err(Error::Config("none of the selected gestures has preprocessed clips".into()));
        }
        Ok(present)
    }

    fn fitted_classes(&self, fit: &FitIndex) -> Result<Vec<String>> {
        let present: Vec<String> = self
            .config
            .classes(&self.dataset)
            .into_iter()
            .filter(|c| fit.classes.iter().any(|f| &f.class == c))
            .collect();
        if present.is_empty() {
            return Err(Error::Config("none of the selected gestures has a fitted model".into()));
        }
        Ok(present)
    }

    fn load_reps(&self, index: &PreprocessIndex, class: &str) -> Result<Vec<Repetition>> {
        let dir = self.stage_dir(Stage::Preprocess);
        index
            .entries
            .par_iter()
            .filter(|e| e.class == class)
            .map(|e| {
                let (skeleton, clip) = read_bvh(&dir.join(&e.clip), "preprocess")?;
                Ok(Repetition { entry: e.clone(), skeleton, clip })
            })
            .collect()
    }

    fn load_system(&self, class: &str) -> Result<GomSystemF64> {
        let path = self.stage_dir(Stage::Fit).join(format!("{class}.json"));
        let text = read_artifact(&path, "fit")?;
        GomSystemF64::from_json(&text).map_err(|e| Error::format(&path)(e.to_string()))
    }

    fn frames(&self, rep: &Repetition, ids: &[gomkit_core::bvh::DescriptorId]) -> Result<DescriptorFramesF64> {
        DescriptorFrames::from_clip(&rep.skeleton, &rep.clip, ids, &self.config.sensor_map())
            .map_err(Self::gom_error(format!("gesture {}, {}", rep.entry.class, rep.entry.clip)))
    }

    fn fit(&self) -> Result<StageOutput> {
        let index = self.load_index()?;
        let classes = self.classes_in(&index)?;
        let fitted = classes.par_iter().map(|c| self.fit_class(&index, c)).collect::<Result<Vec<_>>>()?;
        let mut w = StageWriter::begin(&self.out, Stage::Fit, self.config)?;
        let mut summary = Vec::new();
        for (class, system) in fitted {
            w.write(&format!("{}.json", class.class), system.to_json().as_bytes())?;
            summary.push(class);
        }
        w.json(INDEX_FILE, &FitIndex { version: INDEX_VERSION, dataset: self.dataset.name.clone(), classes: summary })?;
        Ok(w.finish(Stage::Fit))
    }

    fn topology_for(&self, rep: &Repetition) -> Result<GomTopology> {
        build_topology(&rep.skeleton, &self.config.sensor_set(), &self.config.chain_spec(), &self.config.sensor_map())
            .map_err(Self::gom_error(format!("gesture {}, {}", rep.entry.class, rep.entry.clip)))
    }

    fn fit_class(&self, index: &PreprocessIndex, class: &str) -> Result<(FittedClass, GomSystemF64)> {
        let reps = self.load_reps(index, class)?;
        let topology = self.topology_for(&reps[0])?;
        let frames = reps.iter().map(|r| self.frames(r, &topology.descriptors)).collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<Vec<f64>>> = frames.iter().map(DescriptorFrames::rows).collect();
        let r = select_reference(&rows).map_err(|source| Error::Similarity { gesture: class.to_string(), source })?;
        let reference = reps[r].entry.clip.clone();
        let mut system = fit(&frames[r], &topology).map_err(Self::gom_error(format!("gesture {class}, reference {reference}")))?;
        system.meta.source = reference.clone();
        system.meta.reference_index = r;
        let summary = FittedClass { class: class.to_string(), repetitions: reps.len(), reference_index: r, reference };
        Ok((summary, system))
    }

    fn simulate(&self) -> Result<StageOutput> {
        let index = self.load_index()?;
        let classes = self.fitted_classes(&self.load_fit_index()?)?;
        let systems = classes.iter().map(|c| self.load_system(c)).collect::<Result<Vec<_>>>()?;
        let outputs = classes
            .par_iter()
            .zip(&systems)
            .map(|(class, system)| self.simulate_class(&index, class, system))
            .collect::<Result<Vec<_>>>()?;
        let mut w = StageWriter::begin(&self.out, Stage::Simulate, self.config)?;
        for (rel, bytes) in outputs.into_iter().flatten() {
            w.write(&rel, &bytes)?;
        }
        Ok(w.finish(Stage::Simulate))
    }

    fn simulate_class(&self, index: &PreprocessIndex, class: &str, system: &GomSystemF64) -> Result<Vec<(String, Vec<u8>)>> {
        let reps = self.load_reps(index, class)?;
        let ids = &system.topology.descriptors;
        let names: Vec<String> = ids.iter().map(|d| d.to_string()).collect();
        let plotted = reps.iter().position(|r| r.entry.clip == system.meta.source).unwrap_or(0);
        let mut out = Vec::new();
        for (k, rep) in reps.iter().enumerate() {
            let frames = self.frames(rep, ids)?;
            let rows = frames.rows();
            let context = format!("gesture {class}, {}", rep.entry.clip);
            if rows.len() < 2 {
                return Err(Error::Gom { context, source: GomError::Dimension("clip shorter than two frames".into()) });
            }
            let sim = simulate(system, &rows[..2], rows.len()).map_err(Self::gom_error(context))?;
            let stem = Path::new(&rep.entry.clip).file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((format!("{class}/{stem}.csv"), simulation_csv(&names, frames.frame_time, &sim).into_bytes()));
            if k == plotted {
                let sim_cols: Vec<Vec<f64>> = (0..ids.len()).map(|j| sim.iter().map(|r| r[j]).collect()).collect();
                let traces: Vec<Trace> = names
                    .iter()
                    .zip(frames.columns())
                    .zip(&sim_cols)
                    .map(|((label, real), simulated)| Trace { label, real, simulated })
                    .collect();
                let title = format!("{class}: {stem}");
                out.push((format!("{class}.svg"), traces_svg(&title, frames.frame_time, &traces).into_bytes()));
            }
        }
        Ok(out)
    }

    fn evaluate(&self) -> Result<StageOutput> {
        let index = self.load_index()?;
        let classes = self.fitted_classes(&self.load_fit_index()?)?;
        let systems = classes.iter().map(|c| self.load_system(c)).collect::<Result<Vec<_>>>()?;
        let results = classes
            .iter()
            .zip(&systems)
            .map(|(class, system)| {
                let reps = self.load_reps(&index, class)?;
                let frames =
                    reps.iter().map(|r| self.frames(r, &system.topology.descriptors)).collect::<Result<Vec<_>>>()?;
                let metrics = evaluate(system, &frames)
                    .map_err(|source| Error::Evaluate { gesture: class.clone(), source })?;
                let clips = reps.iter().map(|r| r.entry.clip.clone()).collect();
                Ok(GestureEvaluation { gesture: class.clone(), clips, metrics })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut w = StageWriter::begin(&self.out, Stage::Evaluate, self.config)?;
        let rows: Vec<(String, GestureMetricsF64)> = results.iter().map(|r| (r.gesture.clone(), r.metrics.clone())).collect();
        w.write("metrics.csv", metrics_csv(&rows).as_bytes())?;
        for r in &results {
            w.json(&format!("{}.json", r.gesture), r)?;
        }
        Ok(w.finish(Stage::Evaluate))
    }

    fn dexterity(&self) -> Result<StageOutput> {
        let classes = self.fitted_classes(&self.load_fit_index()?)?;
        let systems = classes.iter().map(|c| self.load_system(c)).collect::<Result<Vec<_>>>()?;
        let threshold = self.config.dexterity.threshold;
        let mut total = SensorRanking::default();
        let mut per_gesture = String::from("gesture,sensor,count\n");
        let mut sections = String::new();
        for (class, system) in classes.iter().zip(&systems) {
            let ranking = significance_counts(system, threshold);
            total.merge(&ranking);
            for (s, c) in ranking.ordering() {
                let _ = writeln!(per_gesture, "{class},{s},{c}");
            }
            let _ = write!(sections, "## {class}\n\n{}", report_markdown(system, threshold));
        }
        let mut md = format!(
            "# Dexterity analysis: {}\n\nSignificance threshold: {threshold}\n\n## Vocabulary ranking\n\n",
            self.dataset.name
        );
        md.push_str("| sensor | equations with a significant term |\n|---|---:|\n");
        for (s, c) in total.ordering() {
            let _ = writeln!(md, "| {s} | {c} |");
        }
        md.push('\n');
        md.push_str(&sections);

        let selected = match self.config.dexterity.top_k {
            Some(k) => Some(select_sensors(&total, k)?),
            None => None,
        };
        let mut w = StageWriter::begin(&self.out, Stage::Dexterity, self.config)?;
        w.write("report.md", md.as_bytes())?;
        w.write("counts.csv", total.to_csv().as_bytes())?;
        w.write("gesture_counts.csv", per_gesture.as_bytes())?;
        if let Some(sel) = selected {
            let mut csv = String::from("rank,sensor,count\n");
            for (i, s) in sel.iter().enumerate() {
                let _ = writeln!(csv, "{},{s},{}", i + 1, total.counts[s]);
            }
            w.write("selected.csv", csv.as_bytes())?;
        }
        Ok(w.finish(Stage::Dexterity))
    }

    fn recognize(&self) -> Result<StageOutput> {
        let index = self.load_index()?;
        let classes = self.classes_in(&index)?;
        let ids = self.config.topology()?.descriptors;
        let mut data: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
        for class in &classes {
            for rep in self.load_reps(&index, class)? {
                let rows = self.frames(&rep, &ids)?.rows();
                data.push((class.clone(), rows));
            }
        }
        let report = cross_validate(&data, &self.config.hmm.cv_config())?;
        let mut w = StageWriter::begin(&self.out, Stage::Recognize, self.config)?;
        w.write("report.json", format!("{}\n", report.to_json()).as_bytes())?;
        let csv = format!("{CV_CSV_HEADER}\n{}", report.csv_row(&self.dataset.name, &self.config.sensor_set()));
        w.write("recognition.csv", csv.as_bytes())?;
        Ok(w.finish(Stage::Recognize))
    }
}

/// Repetitions per class in a preprocess index.
pub fn class_counts(index: &PreprocessIndex) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for e in &index.entries {
        *counts.entry(e.class.clone()).or_default() += 1;
    }
    counts
}
