use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GomError;
use crate::bvh::{Axis, DescriptorId, SensorMap, Skeleton};
use crate::scalar::Scalar;

/// Which modelling assumption a regressor stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssumptionTag {
    /// Time-dependent transition (own lags).
    H1,
    /// Intra-joint association (other axes of the same sensor).
    H2,
    /// Inter-limb synergy (contralateral counterpart).
    H3,
    /// Serial intra-limb mediation (adjacent sensor in the chain).
    H4s,
    /// Non-serial intra-limb mediation.
    H4n,
}

impl fmt::Display for AssumptionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssumptionTag::H1 => "H1",
            AssumptionTag::H2 => "H2",
            AssumptionTag::H3 => "H3",
            AssumptionTag::H4s => "H4s",
            AssumptionTag::H4n => "H4n",
        };
        f.write_str(s)
    }
}

/// A serially ordered kinematic chain of sensors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limb {
    pub name: String,
    pub sensors: Vec<String>,
}

/// Partition of sensors into limbs plus the contralateral limb pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub limbs: Vec<Limb>,
    /// Limb names paired left/right; sensors at equal chain positions mirror each other.
    pub mirrors: Vec<(String, String)>,
}

impl Default for ChainSpec {
    fn default() -> Self {
        let limb = |name: &str, sensors: &[&str]| Limb {
            name: name.into(),
            sensors: sensors.iter().map(|s| s.to_string()).collect(),
        };
        Self {
            limbs: vec![
                limb("spine", &["H", "SP1", "SP2", "SP3", "N", "HE"]),
                limb("right_arm", &["RSH1", "RSH2", "RA", "RFA"]),
                limb("left_arm", &["LSH1", "LSH2", "LA", "LFA"]),
                limb("right_leg", &["RUL", "RL"]),
                limb("left_leg", &["LUL", "LL"]),
            ],
            mirrors: vec![
                ("right_arm".into(), "left_arm".into()),
                ("right_leg".into(), "left_leg".into()),
            ],
        }
    }
}

/// Sensor labels of the default chains, in chain order.
pub fn default_sensor_set() -> Vec<String> {
    ChainSpec::default().limbs.into_iter().flat_map(|l| l.sensors).collect()
}

/// Descriptor order and the regressors feeding each equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GomTopology {
    pub sensor_set: Vec<String>,
    pub descriptors: Vec<DescriptorId>,
    pub regressors: BTreeMap<DescriptorId, Vec<(DescriptorId, AssumptionTag)>>,
}

impl GomTopology {
    /// Validates and assembles a topology from explicit regressor lists.
    pub fn new(
        sensor_set: Vec<String>,
        regressors: BTreeMap<DescriptorId, Vec<(DescriptorId, AssumptionTag)>>,
    ) -> Result<Self, GomError> {
        let descriptors: Vec<DescriptorId> = sensor_set
            .iter()
            .flat_map(|s| Axis::ALL.map(|a| DescriptorId::new(s.clone(), a)))
            .collect();
        let topo = Self { sensor_set, descriptors, regressors };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<(), GomError> {
        let known: BTreeSet<&DescriptorId> = self.descriptors.iter().collect();
        if known.len() != self.descriptors.len() {
            return Err(GomError::Topology("duplicate descriptors".into()));
        }
        let keys: BTreeSet<&DescriptorId> = self.regressors.keys().collect();
        if keys != known {
            return Err(GomError::Topology("regressor map must cover exactly the descriptors".into()));
        }
        for (d, regs) in &self.regressors {
            let mut seen = BTreeSet::new();
            for (r, tag) in regs {
                if r == d {
                    return Err(GomError::Topology(format!("{d} regresses on itself")));
                }
                if *tag == AssumptionTag::H1 {
                    return Err(GomError::Topology(format!("{d}: own lags are implicit, not listed")));
                }
                if !known.contains(r) {
                    return Err(GomError::Topology(format!("{d}: regressor {r} not in topology")));
                }
                if !seen.insert(r) {
                    return Err(GomError::Topology(format!("{d}: regressor {r} listed twice")));
                }
            }
            let h2: BTreeSet<&DescriptorId> =
                regs.iter().filter(|(_, t)| *t == AssumptionTag::H2).map(|(r, _)| r).collect();
            let expected: BTreeSet<DescriptorId> = Axis::ALL
                .into_iter()
                .filter(|&a| a != d.axis)
                .map(|a| DescriptorId::new(d.sensor.clone(), a))
                .collect();
            if h2 != expected.iter().collect() {
                return Err(GomError::Topology(format!("{d}: H2 must be exactly the other two axes")));
            }
        }
        Ok(())
    }

    pub fn regressors_of(&self, d: &DescriptorId) -> &[(DescriptorId, AssumptionTag)] {
        self.regressors.get(d).map_or(&[], Vec::as_slice)
    }

    pub fn widest_equation(&self) -> usize {
        self.regressors.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn index_of(&self, d: &DescriptorId) -> Option<usize> {
        self.descriptors.iter().position(|x| x == d)
    }

    /// Topology derived from limb chains alone, without resolving against a skeleton.
    pub fn from_chains(sensor_set: &[String], chains: &ChainSpec) -> Result<Self, GomError> {
        let mut placement: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        // chains restricted to the active sensors keep their serial order
        let active: BTreeSet<&str> = sensor_set.iter().map(String::as_str).collect();
        let limbs: Vec<Vec<&str>> = chains
            .limbs
            .iter()
            .map(|l| l.sensors.iter().map(String::as_str).filter(|s| active.contains(s)).collect())
            .collect();
        for (li, limb) in limbs.iter().enumerate() {
            for (pos, s) in limb.iter().enumerate() {
                if placement.insert(s, (li, pos)).is_some() {
                    return Err(GomError::Chain(format!("sensor {s} appears in more than one limb")));
                }
            }
        }
        if let Some(s) = sensor_set.iter().find(|s| !placement.contains_key(s.as_str())) {
            return Err(GomError::Chain(format!("sensor {s} belongs to no limb")));
        }
        let limb_index = |name: &str| chains.limbs.iter().position(|l| l.name == name);
        let mut mirror_of: BTreeMap<usize, usize> = BTreeMap::new();
        for (a, b) in &chains.mirrors {
            let (Some(ia), Some(ib)) = (limb_index(a), limb_index(b)) else {
                return Err(GomError::Chain(format!("mirror pair ({a}, {b}) names an unknown limb")));
            };
            mirror_of.insert(ia, ib);
            mirror_of.insert(ib, ia);
        }

        let mut regressors = BTreeMap::new();
        for sensor in sensor_set {
            let (li, pos) = placement[sensor.as_str()];
            let limb = &limbs[li];
            let mirror = mirror_of
                .get(&li)
                .and_then(|&mi| limbs[mi].get(pos).copied());
            for axis in Axis::ALL {
                let d = DescriptorId::new(sensor.clone(), axis);
                let mut regs = Vec::new();
                for other in Axis::ALL.into_iter().filter(|&a| a != axis) {
                    regs.push((DescriptorId::new(sensor.clone(), other), AssumptionTag::H2));
                }
                if let Some(m) = mirror {
                    regs.push((DescriptorId::new(m, axis), AssumptionTag::H3));
                }
                for (k, other) in limb.iter().enumerate() {
                    if k == pos {
                        continue;
                    }
                    let tag = if k.abs_diff(pos) == 1 { AssumptionTag::H4s } else { AssumptionTag::H4n };
                    regs.push((DescriptorId::new(*other, axis), tag));
                }
                // serial mediators first, then non-serial, chain order inside each
                regs.sort_by_key(|(_, t)| *t);
                regressors.insert(d, regs);
            }
        }
        Self::new(sensor_set.to_vec(), regressors)
    }
}

/// Builds the default assumption structure, checking every sensor against the skeleton.
pub fn build_topology<T: Scalar>(
    skeleton: &Skeleton<T>,
    sensor_set: &[String],
    chains: &ChainSpec,
    sensors: &SensorMap,
) -> Result<GomTopology, GomError> {
    for s in sensor_set {
        for axis in Axis::ALL {
            sensors
                .resolve(skeleton, &DescriptorId::new(s.clone(), axis))
                .map_err(|e| GomError::UnknownSensor(format!("{s}: {e}")))?;
        }
    }
    GomTopology::from_chains(sensor_set, chains)
}
