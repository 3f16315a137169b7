use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hmm::{classify, train, HmmConfig, HmmModel, HmmTopology};
use super::RecognitionError;
use crate::scalar::Scalar;

pub const CV_CSV_HEADER: &str = "vocabulary,n_classes,sensors,accuracy,f1";

/// Per-feature z-scoring with statistics from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit<'a>(sequences: impl IntoIterator<Item = &'a [Vec<T>]>) -> Result<Self, RecognitionError> {
        let mut n = 0usize;
        let mut sum: Vec<T> = Vec::new();
        let mut frames: Vec<&[T]> = Vec::new();
        for s in sequences {
            for row in s {
                if sum.is_empty() {
                    sum = vec![T::zero(); row.len()];
                }
                if row.len() != sum.len() {
                    return Err(RecognitionError::Dimension { expected: sum.len(), got: row.len() });
                }
                sum.iter_mut().zip(row).for_each(|(a, &x)| *a = *a + x);
                frames.push(row);
                n += 1;
            }
        }
        if n == 0 {
            return Err(RecognitionError::NoSequences);
        }
        let count = T::from_usize_lossy(n);
        let mean: Vec<T> = sum.into_iter().map(|s| s / count).collect();
        let mut sq = vec![T::zero(); mean.len()];
        for row in frames {
            for (f, &x) in row.iter().enumerate() {
                sq[f] = sq[f] + (x - mean[f]) * (x - mean[f]);
            }
        }
        let std: Vec<T> = sq.into_iter().map(|q| (q / count).sqrt()).collect();
        if let Some(feature) = std.iter().position(|&s| !(s > T::zero())) {
            return Err(RecognitionError::DegenerateData { feature });
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, seq: &[Vec<T>]) -> Vec<Vec<T>> {
        seq.iter()
            .map(|r| r.iter().zip(&self.mean).zip(&self.std).map(|((&x, &m), &s)| (x - m) / s).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub n_states: usize,
    pub topology: HmmTopology,
    pub folds: usize,
    pub seed: u64,
    pub hmm: HmmConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { n_states: 7, topology: HmmTopology::LeftToRight, folds: 10, seed: 0, hmm: HmmConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    /// Position of the sequence in the input list.
    pub index: usize,
    pub fold: usize,
    pub truth: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classes: Vec<String>,
    pub folds: usize,
    pub n_states: usize,
    pub topology: HmmTopology,
    pub seed: u64,
    pub fold_accuracy: Vec<f64>,
    pub accuracy: f64,
    pub class_f1: Vec<f64>,
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted classes, both in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

impl CvReport {
    fn from_predictions(classes: Vec<String>, folds: usize, config: &CvConfig, mut predictions: Vec<Prediction>) -> Self {
        predictions.sort_by_key(|p| p.index);
        let k = classes.len();
        let pos = |l: &str| classes.iter().position(|c| c == l).expect("known class");
        let mut confusion = vec![vec![0usize; k]; k];
        let mut fold_hits = vec![(0usize, 0usize); folds];
        for p in &predictions {
            confusion[pos(&p.truth)][pos(&p.predicted)] += 1;
            fold_hits[p.fold].1 += 1;
            if p.truth == p.predicted {
                fold_hits[p.fold].0 += 1;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let hits: usize = (0..k).map(|i| confusion[i][i]).sum();
        let class_f1: Vec<f64> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let precision = ratio(tp, (0..k).map(|r| confusion[r][c]).sum());
                let recall = ratio(tp, confusion[c].iter().sum());
                if tp == 0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
            .collect();
        Self {
            folds,
            n_states: config.n_states,
            topology: config.topology,
            seed: config.seed,
            fold_accuracy: fold_hits.iter().map(|&(h, n)| ratio(h, n)).collect(),
            accuracy: ratio(hits, predictions.len()),
            macro_f1: class_f1.iter().sum::<f64>() / k as f64,
            class_f1,
            confusion,
            predictions,
            classes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One recognition-table row (no header); see [`CV_CSV_HEADER`].
    pub fn csv_row(&self, vocabulary: &str, sensors: &[String]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            vocabulary.to_string(),
            self.classes.len().to_string(),
            sensors.join(", "),
            format!("{:.3}", self.accuracy),
            format!("{:.3}", self.macro_f1),
        ])
        .expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

/// Stratified k-fold cross-validation of per-class HMMs.
///
/// Features are z-scored with statistics pooled over each training fold.
pub fn cross_validate<T: Scalar>(data: &[(String, Vec<Vec<T>>)], config: &CvConfig) -> Result<CvReport, RecognitionError> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (label, _)) in data.iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(RecognitionError::NoSequences);
    }
    if let Some((class, idx)) = by_class.iter().find(|(_, v)| v.len() < 2) {
        return Err(RecognitionError::InsufficientData { class: class.to_string(), count: idx.len() });
    }
    if config.folds < 2 {
        return Err(RecognitionError::Config("at least 2 folds are needed".into()));
    }
    let smallest = by_class.values().map(Vec::len).min().expect("non-empty");
    let folds = if smallest < config.folds {
        log::warn!("smallest class has {smallest} repetitions; using {smallest} folds instead of {}", config.folds);
        smallest
    } else {
        config.folds
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut fold_of = vec![0usize; data.len()];
    let mut offset = 0;
    for idx in by_class.values() {
        let mut idx = idx.clone();
        idx.shuffle(&mut rng);
        for (p, &i) in idx.iter().enumerate() {
            fold_of[i] = (p + offset) % folds;
        }
        offset += idx.len();
    }

    let classes: Vec<String> = by_class.keys().map(|c| c.to_string()).collect();
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] != fold).collect();
            let scaler = Standardizer::fit(train_idx.iter().map(|&i| data[i].1.as_slice()))?;
            let mut models: BTreeMap<String, HmmModel<T>> = BTreeMap::new();
            for class in &classes {
                let seqs: Vec<Vec<Vec<T>>> = train_idx
                    .iter()
                    .filter(|&&i| &data[i].0 == class)
                    .map(|&i| scaler.apply(&data[i].1))
                    .collect();
                models.insert(class.clone(), train(&seqs, config.n_states, config.topology, &config.hmm)?.model);
            }
            (0..data.len())
                .filter(|&i| fold_of[i] == fold)
                .map(|i| {
                    let predicted = classify(&models, &scaler.apply(&data[i].1))?.to_string();
                    Ok(Prediction { index: i, fold, truth: data[i].0.clone(), predicted })
                })
                .collect::<Result<Vec<_>, RecognitionError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvReport::from_predictions(classes, folds, config, per_fold.into_iter().flatten().collect()))
}
