//! Reading fitted equation banks: term significance, movement speed, and
//! which sensors matter most across a gesture vocabulary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::DescriptorId;
use crate::gom::{AssumptionTag, GomSystem};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DexterityError {
    #[error("descriptor {0} is not part of the system")]
    UnknownDescriptor(String),
    #[error("cannot select {k} sensors out of {available}")]
    Range { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    /// Own value `lag` steps back (1 or 2).
    Lag(u8),
    Regressor(DescriptorId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TermReport<T> {
    pub term: Term,
    pub coefficient: T,
    pub p_value: T,
    pub tag: AssumptionTag,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speed {
    Slow,
    Moderate,
    Fast,
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speed::Slow => "slow",
            Speed::Moderate => "moderate",
            Speed::Fast => "fast",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EquationReport<T> {
    pub descriptor: DescriptorId,
    pub threshold: T,
    pub terms: Vec<TermReport<T>>,
    pub speed: Speed,
}

impl<T: Scalar> EquationReport<T> {
    /// Sensor labels with at least one significant term in this equation.
    pub fn significant_sensors(&self) -> BTreeSet<&str> {
        self.terms
            .iter()
            .filter(|t| t.significant)
            .map(|t| match &t.term {
                Term::Lag(_) => self.descriptor.sensor.as_str(),
                Term::Regressor(r) => r.sensor.as_str(),
            })
            .collect()
    }
}

pub fn equation_report<T: Scalar>(
    system: &GomSystem<T>,
    descriptor: &DescriptorId,
    threshold: T,
) -> Result<EquationReport<T>, DexterityError> {
    let model = system
        .model(descriptor)
        .ok_or_else(|| DexterityError::UnknownDescriptor(descriptor.to_string()))?;
    let mut terms = Vec::new();
    for lag in 0..2 {
        let p = model.p_values.alpha[lag];
        terms.push(TermReport {
            term: Term::Lag(lag as u8 + 1),
            coefficient: model.alpha[lag],
            p_value: p,
            tag: AssumptionTag::H1,
            significant: p < threshold,
        });
    }
    for (r, tag) in system.topology.regressors_of(descriptor) {
        let p = model.p_values.betas[r];
        terms.push(TermReport {
            term: Term::Regressor(r.clone()),
            coefficient: model.betas[r],
            p_value: p,
            tag: *tag,
            significant: p < threshold,
        });
    }
    let speed = match (terms[0].significant, terms[1].significant) {
        (true, true) => Speed::Slow,
        (false, false) => Speed::Fast,
        _ => Speed::Moderate,
    };
    Ok(EquationReport { descriptor: descriptor.clone(), threshold, terms, speed })
}

/// Number of equations in which each sensor has a significant term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorRanking {
    pub counts: BTreeMap<String, usize>,
}

impl SensorRanking {
    /// Sensors by descending count, ties by label.
    pub fn ordering(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self.counts.iter().map(|(s, &c)| (s.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Adds another ranking's counts (vocabulary-level aggregation).
    pub fn merge(&mut self, other: &SensorRanking) {
        for (s, &c) in &other.counts {
            *self.counts.entry(s.clone()).or_default() += c;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensor,count\n");
        for (s, c) in self.ordering() {
            let _ = writeln!(out, "{s},{c}");
        }
        out
    }
}

pub fn significance_counts<T: Scalar>(system: &GomSystem<T>, threshold: T) -> SensorRanking {
    let mut counts: BTreeMap<String, usize> = system.topology.sensor_set.iter().map(|s| (s.clone(), 0)).collect();
    for d in &system.topology.descriptors {
        let report = equation_report(system, d, threshold).expect("descriptor from topology");
        for s in report.significant_sensors() {
            *counts.entry(s.to_string()).or_default() += 1;
        }
    }
    SensorRanking { counts }
}

/// Top-`k` sensors of a ranking; each selected sensor contributes all three axes.
pub fn select_sensors(ranking: &SensorRanking, k: usize) -> Result<Vec<String>, DexterityError> {
    let available = ranking.counts.len();
    if k == 0 || k > available {
        return Err(DexterityError::Range { k, available });
    }
    Ok(ranking.ordering().into_iter().take(k).map(|(s, _)| s.to_string()).collect())
}

fn term_label(descriptor: &DescriptorId, term: &Term) -> String {
    match term {
        Term::Lag(l) => format!("{descriptor}[t-{l}]"),
        Term::Regressor(r) => format!("{r}[t-1]"),
    }
}

/// Markdown tables, one per equation.
pub fn report_markdown<T: Scalar>(system: &GomSystem<T>, threshold: T) -> String {
    let mut out = String::new();
    for d in &system.topology.descriptors {
        let r = equation_report(system, d, threshold).expect("descriptor from topology");
        let _ = writeln!(out, "### {d} (speed: {})\n", r.speed);
        let _ = writeln!(out, "| term | coefficient | p | assumption | significant |");
        let _ = writeln!(out, "|---|---:|---:|---|---|");
        for t in &r.terms {
            let _ = writeln!(
                out,
                "| {} | {:.4} | {:.4} | {} | {} |",
                term_label(d, &t.term),
                t.coefficient.to_f64_lossy(),
                t.p_value.to_f64_lossy(),
                t.tag,
                if t.significant { "yes" } else { "no" }
            );
        }
        out.push('\n');
    }
    out
}
