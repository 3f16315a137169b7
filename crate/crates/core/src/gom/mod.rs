//! Gesture Operational Model: one second-order state-space equation per
//! joint-angle descriptor, with exogenous regressors from associated joints.
//!
//! For a descriptor `y` with regressors `u_1..u_n` the equation is
//!
//! ```text
//! y_t = a1 y_{t-1} + a2 y_{t-2} + b_1 u_{1,t-1} + ... + b_n u_{n,t-1} + e_t,  e_t ~ N(0, s2)
//! ```
//!
//! `a2` is stored as the signed coefficient that multiplies the raw lag-2
//! value. In state-space form the lag pair `(y_{t-1}, y_{t-2})` is the state,
//! the regressors enter as a known input, and `e_t` is the only noise source,
//! so the Kalman filter log-likelihood coincides with the conditional Gaussian
//! regression likelihood and its maximiser has a closed form.

mod fit;
pub mod kalman;
mod simulate;
mod topology;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{extract_descriptor, BvhError, DescriptorId, MotionClip, SensorMap, Skeleton};
use crate::scalar::Scalar;

pub use fit::{equation_state_space, fit, fit_each, fit_equation, loglik_oracle, model_loglik, RIDGE};
pub use simulate::{predict_open_loop, simulate, DIVERGENCE_LIMIT_DEG};
pub use topology::{build_topology, default_sensor_set, AssumptionTag, ChainSpec, GomTopology, Limb};

pub const GOM_JSON_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GomError {
    #[error("unknown sensor {0}")]
    UnknownSensor(String),
    #[error("kinematic chain: {0}")]
    Chain(String),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{descriptor}: reference has {got} frames, need at least {needed}")]
    Length { descriptor: String, needed: usize, got: usize },
    #[error("{descriptor}: singular fit ({reason})")]
    Singular { descriptor: String, reason: String },
    #[error("fit failed for {}", .0.iter().map(|(d, e)| format!("{d} [{e}]")).collect::<Vec<_>>().join(", "))]
    Fit(Vec<(String, GomError)>),
    #[error("{descriptor} diverged at step {step} (value {value})")]
    Divergence { descriptor: String, step: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("sequence too long for dense evaluation: {got} observations, max {max}")]
    TooLong { max: usize, got: usize },
    #[error("model document: {0}")]
    Document(String),
    #[error(transparent)]
    Bvh(#[from] BvhError),
}

/// Joint-angle series of a set of descriptors, column per descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorFrames<T> {
    pub ids: Vec<DescriptorId>,
    pub frame_time: T,
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> DescriptorFrames<T> {
    pub fn new(ids: Vec<DescriptorId>, frame_time: T, columns: Vec<Vec<T>>) -> Result<Self, GomError> {
        if ids.len() != columns.len() {
            return Err(GomError::Dimension(format!("{} ids for {} columns", ids.len(), columns.len())));
        }
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(GomError::Dimension("descriptor columns differ in length".into()));
        }
        Ok(Self { ids, frame_time, columns })
    }

    /// Builds from `T × D` rows.
    pub fn from_rows(ids: Vec<DescriptorId>, frame_time: T, rows: &[Vec<T>]) -> Result<Self, GomError> {
        let d = ids.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(GomError::Dimension(format!("rows must have {d} values")));
        }
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::new(ids, frame_time, columns)
    }

    pub fn from_clip(
        skeleton: &Skeleton<T>,
        clip: &MotionClip<T>,
        ids: &[DescriptorId],
        sensors: &SensorMap,
    ) -> Result<Self, GomError> {
        let columns = ids
            .iter()
            .map(|id| extract_descriptor(skeleton, clip, id, sensors))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ids.to_vec(), clip.frame_time, columns)
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, id: &DescriptorId) -> Option<&[T]> {
        self.ids.iter().position(|x| x == id).map(|j| self.columns[j].as_slice())
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|t| self.columns.iter().map(|c| c[t]).collect()).collect()
    }

    /// Same frames, columns reordered/restricted to `ids`.
    pub fn select(&self, ids: &[DescriptorId]) -> Result<Self, GomError> {
        let columns = ids
            .iter()
            .map(|id| {
                self.column(id)
                    .map(<[T]>::to_vec)
                    .ok_or_else(|| GomError::Dimension(format!("descriptor {id} not present")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ids.to_vec(), self.frame_time, columns)
    }
}

/// Per-term values of one equation: the two lags and each regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TermValues<T> {
    pub alpha: [T; 2],
    pub betas: BTreeMap<DescriptorId, T>,
}

/// One fitted descriptor equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GomModel<T> {
    pub descriptor: DescriptorId,
    /// Coefficients of `y_{t-1}` and `y_{t-2}`.
    pub alpha: [T; 2],
    pub betas: BTreeMap<DescriptorId, T>,
    /// Equation noise variance, deg².
    pub obs_noise_var: T,
    pub p_values: TermValues<T>,
    pub std_errors: TermValues<T>,
    pub log_likelihood: T,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingMeta<T> {
    pub source: String,
    pub reference_index: usize,
    pub frame_time: T,
}

/// The full equation bank for one gesture class.
#[derive(Debug, Clone, PartialEq)]
pub struct GomSystem<T> {
    pub topology: GomTopology,
    pub models: BTreeMap<DescriptorId, GomModel<T>>,
    pub meta: TrainingMeta<T>,
}

#[derive(Serialize, Deserialize)]
struct Edge {
    descriptor: DescriptorId,
    regressor: DescriptorId,
    tag: AssumptionTag,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct SystemDocument<T> {
    version: u32,
    sensor_set: Vec<String>,
    frame_time: T,
    source: String,
    reference_index: usize,
    models: BTreeMap<DescriptorId, GomModel<T>>,
    edges: Vec<Edge>,
}

impl<T: Scalar> GomSystem<T> {
    pub fn new(topology: GomTopology, models: BTreeMap<DescriptorId, GomModel<T>>, meta: TrainingMeta<T>) -> Result<Self, GomError> {
        let sys = Self { topology, models, meta };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<(), GomError> {
        self.topology.validate()?;
        let keys: Vec<&DescriptorId> = self.models.keys().collect();
        let mut expected: Vec<&DescriptorId> = self.topology.descriptors.iter().collect();
        expected.sort();
        if keys != expected {
            return Err(GomError::Topology("models do not match the topology descriptors".into()));
        }
        for (d, m) in &self.models {
            let regs: Vec<&DescriptorId> = self.topology.regressors_of(d).iter().map(|(r, _)| r).collect();
            let mut sorted = regs.clone();
            sorted.sort();
            if m.betas.keys().collect::<Vec<_>>() != sorted || m.p_values.betas.keys().collect::<Vec<_>>() != sorted {
                return Err(GomError::Topology(format!("{d}: coefficients do not match its regressors")));
            }
            if !(m.obs_noise_var > T::zero()) {
                return Err(GomError::Topology(format!("{d}: noise variance must be positive")));
            }
        }
        Ok(())
    }

    pub fn model(&self, d: &DescriptorId) -> Option<&GomModel<T>> {
        self.models.get(d)
    }

    pub fn to_json(&self) -> String {
        let doc = SystemDocument {
            version: GOM_JSON_VERSION,
            sensor_set: self.topology.sensor_set.clone(),
            frame_time: self.meta.frame_time,
            source: self.meta.source.clone(),
            reference_index: self.meta.reference_index,
            models: self.models.clone(),
            edges: self
                .topology
                .descriptors
                .iter()
                .flat_map(|d| {
                    self.topology.regressors_of(d).iter().map(move |(r, tag)| Edge {
                        descriptor: d.clone(),
                        regressor: r.clone(),
                        tag: *tag,
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, GomError> {
        let doc: SystemDocument<T> = serde_json::from_str(text).map_err(|e| GomError::Document(e.to_string()))?;
        if doc.version != GOM_JSON_VERSION {
            return Err(GomError::Document(format!("unsupported version {}", doc.version)));
        }
        let mut regressors: BTreeMap<DescriptorId, Vec<(DescriptorId, AssumptionTag)>> = doc
            .sensor_set
            .iter()
            .flat_map(|s| crate::bvh::Axis::ALL.map(|a| (DescriptorId::new(s.clone(), a), Vec::new())))
            .collect();
        for e in doc.edges {
            regressors
                .get_mut(&e.descriptor)
                .ok_or_else(|| GomError::Document(format!("edge for unknown descriptor {}", e.descriptor)))?
                .push((e.regressor, e.tag));
        }
        let topology = GomTopology::new(doc.sensor_set, regressors)?;
        Self::new(
            topology,
            doc.models,
            TrainingMeta { source: doc.source, reference_index: doc.reference_index, frame_time: doc.frame_time },
        )
    }
}
