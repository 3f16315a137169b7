//! Forecast-quality metrics between recorded and simulated motion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::DescriptorId;
use crate::gom::{simulate, DescriptorFrames, GomError, GomSystem};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("series lengths differ ({real} vs {sim})")]
    LengthMismatch { real: usize, sim: usize },
    #[error("empty series")]
    Empty,
    #[error("Theil's U1 undefined: both series are identically zero")]
    Degenerate,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("repetition {repetition}: {source}")]
    Simulation { repetition: usize, source: GomError },
    #[error("repetition {repetition}, {descriptor}: {source}")]
    Metric { repetition: usize, descriptor: String, source: MetricError },
}

fn check<T>(real: &[T], sim: &[T]) -> Result<(), MetricError> {
    if real.len() != sim.len() {
        return Err(MetricError::LengthMismatch { real: real.len(), sim: sim.len() });
    }
    if real.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn mean_of<T: Scalar>(values: impl Iterator<Item = T>, n: usize) -> T {
    values.sum::<T>() / T::from_usize_lossy(n)
}

pub fn rmse<T: Scalar>(real: &[T], sim: &[T]) -> Result<T, MetricError> {
    check(real, sim)?;
    Ok(mean_of(real.iter().zip(sim).map(|(&p, &q)| (p - q) * (p - q)), real.len()).sqrt())
}

pub fn mae<T: Scalar>(real: &[T], sim: &[T]) -> Result<T, MetricError> {
    check(real, sim)?;
    Ok(mean_of(real.iter().zip(sim).map(|(&p, &q)| (p - q).abs()), real.len()))
}

/// Theil's inequality coefficient U1, in [0, 1].
pub fn theil_u1<T: Scalar>(real: &[T], sim: &[T]) -> Result<T, MetricError> {
    let err = rmse(real, sim)?;
    let n = real.len();
    let denom = mean_of(real.iter().map(|&p| p * p), n).sqrt() + mean_of(sim.iter().map(|&q| q * q), n).sqrt();
    if !(denom > T::zero()) {
        return Err(MetricError::Degenerate);
    }
    // rounding can push the ratio a hair past 1 for sim = -real
    Ok((err / denom).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DescriptorMetrics<T> {
    pub descriptor: DescriptorId,
    pub rmse: T,
    pub mae: T,
    pub u1: T,
}

/// Metrics of one simulated repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetricReport<T> {
    pub descriptors: Vec<DescriptorMetrics<T>>,
    pub mean_rmse: T,
    pub mean_mae: T,
    pub avg_u1: T,
}

impl<T: Scalar> MetricReport<T> {
    pub fn from_descriptors(descriptors: Vec<DescriptorMetrics<T>>) -> Self {
        let n = descriptors.len().max(1);
        Self {
            mean_rmse: mean_of(descriptors.iter().map(|d| d.rmse), n),
            mean_mae: mean_of(descriptors.iter().map(|d| d.mae), n),
            avg_u1: mean_of(descriptors.iter().map(|d| d.u1), n),
            descriptors,
        }
    }
}

/// Per-gesture summary: descriptor means averaged over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GestureMetrics<T> {
    pub repetitions: Vec<MetricReport<T>>,
    pub rmse: Option<T>,
    pub mae: Option<T>,
    pub avg_u1: Option<T>,
}

impl<T: Scalar> GestureMetrics<T> {
    pub fn from_repetitions(repetitions: Vec<MetricReport<T>>) -> Self {
        let n = repetitions.len();
        let agg = |f: fn(&MetricReport<T>) -> T| (n > 0).then(|| mean_of(repetitions.iter().map(f), n));
        Self {
            rmse: agg(|r| r.mean_rmse),
            mae: agg(|r| r.mean_mae),
            avg_u1: agg(|r| r.avg_u1),
            repetitions,
        }
    }
}

/// Metrics between recorded frames and a simulation of the same descriptors.
pub fn compare<T: Scalar>(real: &DescriptorFrames<T>, sim: &DescriptorFrames<T>) -> Result<MetricReport<T>, (String, MetricError)> {
    let per = real
        .ids
        .iter()
        .zip(real.columns())
        .map(|(id, r)| {
            let s = sim
                .column(id)
                .ok_or_else(|| (id.to_string(), MetricError::LengthMismatch { real: r.len(), sim: 0 }))?;
            let wrap = |e| (id.to_string(), e);
            Ok(DescriptorMetrics {
                descriptor: id.clone(),
                rmse: rmse(r, s).map_err(wrap)?,
                mae: mae(r, s).map_err(wrap)?,
                u1: theil_u1(r, s).map_err(wrap)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricReport::from_descriptors(per))
}

/// Simulates every repetition from its first two frames and scores it.
pub fn evaluate<T: Scalar>(system: &GomSystem<T>, repetitions: &[DescriptorFrames<T>]) -> Result<GestureMetrics<T>, EvaluateError> {
    let ids = &system.topology.descriptors;
    let reports = repetitions
        .par_iter()
        .enumerate()
        .map(|(k, rep)| {
            let sim_err = |source| EvaluateError::Simulation { repetition: k, source };
            let real = rep.select(ids).map_err(sim_err)?;
            let rows = real.rows();
            let seed = rows.get(..2).ok_or_else(|| sim_err(GomError::Dimension("repetition shorter than two frames".into())))?;
            let sim = simulate(system, seed, rows.len()).map_err(sim_err)?;
            let sim = DescriptorFrames::from_rows(ids.clone(), real.frame_time, &sim).map_err(sim_err)?;
            compare(&real, &sim).map_err(|(descriptor, source)| EvaluateError::Metric { repetition: k, descriptor, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GestureMetrics::from_repetitions(reports))
}

/// `gesture,repetitions,rmse,mae,avg_u1` rows.
pub fn metrics_csv<T: Scalar>(rows: &[(String, GestureMetrics<T>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gesture", "repetitions", "rmse", "mae", "avg_u1"]).expect("in-memory csv");
    let fmt = |v: Option<T>| v.map_or_else(String::new, |v| format!("{:.6}", v.to_f64_lossy()));
    for (gesture, m) in rows {
        w.write_record([
            gesture.clone(),
            m.repetitions.len().to_string(),
            fmt(m.rmse),
            fmt(m.mae),
            fmt(m.avg_u1),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}
