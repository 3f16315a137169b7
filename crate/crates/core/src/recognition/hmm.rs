use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RecognitionError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmmTopology {
    /// Self-transition or advance by one state.
    #[default]
    LeftToRight,
    Ergodic,
}

impl fmt::Display for HmmTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HmmTopology::LeftToRight => "left_to_right",
            HmmTopology::Ergodic => "ergodic",
        })
    }
}

impl FromStr for HmmTopology {
    type Err = RecognitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left_to_right" | "left-to-right" => Ok(HmmTopology::LeftToRight),
            "ergodic" => Ok(HmmTopology::Ergodic),
            other => Err(RecognitionError::Config(format!("unknown HMM topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub max_iter: usize,
    /// Stop once an iteration improves the total log-likelihood by less than this.
    pub tolerance: f64,
    pub variance_floor: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self { max_iter: 100, tolerance: 1e-4, variance_floor: 1e-6 }
    }
}

/// Hidden Markov model with diagonal Gaussian emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HmmModel<T> {
    pub topology: HmmTopology,
    pub initial: Vec<T>,
    pub transition: Vec<Vec<T>>,
    pub means: Vec<Vec<T>>,
    pub variances: Vec<Vec<T>>,
}

impl<T: Scalar> HmmModel<T> {
    pub fn new(
        topology: HmmTopology,
        initial: Vec<T>,
        transition: Vec<Vec<T>>,
        means: Vec<Vec<T>>,
        variances: Vec<Vec<T>>,
    ) -> Result<Self, RecognitionError> {
        let m = Self { topology, initial, transition, means, variances };
        m.validate()?;
        Ok(m)
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), RecognitionError> {
        let n = self.n_states();
        let bad = |m: &str| Err(RecognitionError::Model(m.to_string()));
        if n == 0 {
            return bad("model needs at least one state");
        }
        if self.transition.len() != n || self.means.len() != n || self.variances.len() != n {
            return bad("state counts disagree");
        }
        let d = self.dim();
        if d == 0 || self.means.iter().chain(&self.variances).any(|v| v.len() != d) {
            return bad("emission dimensions disagree");
        }
        if self.variances.iter().flatten().any(|&v| !(v > T::zero())) {
            return bad("variances must be positive");
        }
        let tol = T::lit(1e-6);
        let stochastic = |row: &[T]| row.iter().all(|&p| p >= T::zero()) && (row.iter().copied().sum::<T>() - T::one()).abs() < tol;
        if !stochastic(&self.initial) || self.transition.iter().any(|r| r.len() != n || !stochastic(r)) {
            return bad("probabilities must be non-negative and sum to 1");
        }
        if self.topology == HmmTopology::LeftToRight {
            let backward = (0..n).any(|i| (0..n).any(|j| (j < i || j > i + 1) && self.transition[i][j] != T::zero()));
            if backward || self.initial[0] != T::one() {
                return bad("left-to-right model must start in state 0 and only stay or advance");
            }
        }
        Ok(())
    }

    fn log_emissions(&self, seq: &[Vec<T>]) -> Vec<Vec<T>> {
        let ln_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
        let half = T::lit(0.5);
        let norm: Vec<T> = self
            .variances
            .iter()
            .map(|v| -half * v.iter().map(|&s| ln_2pi + s.ln()).sum::<T>())
            .collect();
        seq.iter()
            .map(|x| {
                (0..self.n_states())
                    .map(|i| {
                        let q: T = x
                            .iter()
                            .zip(&self.means[i])
                            .zip(&self.variances[i])
                            .map(|((&x, &m), &v)| (x - m) * (x - m) / v)
                            .sum();
                        norm[i] - half * q
                    })
                    .collect()
            })
            .collect()
    }

    fn check_sequence(&self, seq: &[Vec<T>]) -> Result<(), RecognitionError> {
        if seq.is_empty() {
            return Err(RecognitionError::EmptySequence);
        }
        let d = self.dim();
        if let Some(row) = seq.iter().find(|r| r.len() != d) {
            return Err(RecognitionError::Dimension { expected: d, got: row.len() });
        }
        Ok(())
    }
}

/// Scaled forward pass: normalized filtered state probabilities and log scale factors.
fn forward<T: Scalar>(model: &HmmModel<T>, logb: &[Vec<T>]) -> (Vec<Vec<T>>, Vec<T>) {
    let n = model.n_states();
    let mut alphas = Vec::with_capacity(logb.len());
    let mut log_c = Vec::with_capacity(logb.len());
    for (t, lb) in logb.iter().enumerate() {
        let pred: Vec<T> = if t == 0 {
            model.initial.clone()
        } else {
            let prev: &Vec<T> = &alphas[t - 1];
            (0..n).map(|j| (0..n).map(|i| prev[i] * model.transition[i][j]).sum()).collect()
        };
        let s: Vec<T> = (0..n)
            .map(|j| if pred[j] > T::zero() { pred[j].ln() + lb[j] } else { T::neg_infinity() })
            .collect();
        let m = s.iter().copied().fold(T::neg_infinity(), T::max);
        let mut a: Vec<T> = s.iter().map(|&v| (v - m).exp()).collect();
        let z: T = a.iter().copied().sum();
        a.iter_mut().for_each(|v| *v = *v / z);
        alphas.push(a);
        log_c.push(m + z.ln());
    }
    (alphas, log_c)
}

/// Forward-algorithm log-probability of one sequence.
pub fn loglik<T: Scalar>(model: &HmmModel<T>, seq: &[Vec<T>]) -> Result<T, RecognitionError> {
    model.check_sequence(seq)?;
    let (_, log_c) = forward(model, &model.log_emissions(seq));
    Ok(log_c.into_iter().sum())
}

/// Class with the highest log-likelihood; ties go to the first label in order.
pub fn classify<'a, T: Scalar>(models: &'a BTreeMap<String, HmmModel<T>>, seq: &[Vec<T>]) -> Result<&'a str, RecognitionError> {
    let mut best: Option<(&str, T)> = None;
    for (label, model) in models {
        let ll = loglik(model, seq)?;
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((label, ll));
        }
    }
    best.map(|(l, _)| l).ok_or(RecognitionError::EmptyModelSet)
}

/// Result of Baum-Welch training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HmmFit<T> {
    pub model: HmmModel<T>,
    /// Total training log-likelihood of each visited parameter set, the last one being `model`'s.
    pub loglik_history: Vec<T>,
}

pub fn hmm_fit<T: Scalar>(
    sequences: &[Vec<Vec<T>>],
    n_states: usize,
    topology: HmmTopology,
    config: &HmmConfig,
) -> Result<HmmFit<T>, RecognitionError> {
    let d = check_training(sequences, n_states, topology)?;
    for f in 0..d {
        let mut values = sequences.iter().flatten().map(|r| r[f]);
        let first = values.next().expect("non-empty training data");
        if values.all(|v| v == first) {
            return Err(RecognitionError::DegenerateData { feature: f });
        }
    }
    train(sequences, n_states, topology, config)
}

fn check_training<T: Scalar>(sequences: &[Vec<Vec<T>>], n_states: usize, topology: HmmTopology) -> Result<usize, RecognitionError> {
    if n_states == 0 {
        return Err(RecognitionError::Config("n_states must be at least 1".into()));
    }
    let d = sequences
        .first()
        .and_then(|s| s.first())
        .map(Vec::len)
        .ok_or(RecognitionError::NoSequences)?;
    if d == 0 {
        return Err(RecognitionError::Dimension { expected: 1, got: 0 });
    }
    for (k, s) in sequences.iter().enumerate() {
        if s.is_empty() {
            return Err(RecognitionError::EmptySequence);
        }
        if let Some(r) = s.iter().find(|r| r.len() != d) {
            return Err(RecognitionError::Dimension { expected: d, got: r.len() });
        }
        if topology == HmmTopology::LeftToRight && s.len() < n_states {
            return Err(RecognitionError::SequenceTooShort { index: k, len: s.len(), n_states });
        }
    }
    Ok(d)
}

/// Baum-Welch without the degenerate-feature guard.
pub(crate) fn train<T: Scalar>(
    sequences: &[Vec<Vec<T>>],
    n_states: usize,
    topology: HmmTopology,
    config: &HmmConfig,
) -> Result<HmmFit<T>, RecognitionError> {
    check_training(sequences, n_states, topology)?;
    let floor = T::lit(config.variance_floor);
    let tol = T::lit(config.tolerance);
    let mut model = initialise(sequences, n_states, topology, floor);
    let mut history = Vec::new();
    loop {
        let stats = expectation(&model, sequences);
        let ll = stats.loglik;
        let done = history.last().is_some_and(|&prev: &T| ll - prev < tol) || history.len() >= config.max_iter;
        history.push(ll);
        if done || !ll.is_finite() {
            break;
        }
        model = maximisation(&model, &stats, floor);
    }
    Ok(HmmFit { model, loglik_history: history })
}

fn initialise<T: Scalar>(sequences: &[Vec<Vec<T>>], n: usize, topology: HmmTopology, floor: T) -> HmmModel<T> {
    let d = sequences[0][0].len();
    let mut sum = vec![vec![T::zero(); d]; n];
    let mut sq = vec![vec![T::zero(); d]; n];
    let mut count = vec![0usize; n];
    for s in sequences {
        let len = s.len();
        for (t, x) in s.iter().enumerate() {
            let block = t * n / len;
            count[block] += 1;
            for f in 0..d {
                sum[block][f] = sum[block][f] + x[f];
                sq[block][f] = sq[block][f] + x[f] * x[f];
            }
        }
    }
    let total = count.iter().sum::<usize>();
    let pooled = |f: usize, acc: &[Vec<T>]| acc.iter().map(|r| r[f]).sum::<T>() / T::from_usize_lossy(total);
    let (mut means, mut variances) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let (m, v): (Vec<T>, Vec<T>) = (0..d)
            .map(|f| {
                let (s, q, c) = if count[i] > 0 {
                    (sum[i][f], sq[i][f], T::from_usize_lossy(count[i]))
                } else {
                    (pooled(f, &sum), pooled(f, &sq), T::one())
                };
                let mean = s / c;
                (mean, (q / c - mean * mean).max(floor))
            })
            .unzip();
        means.push(m);
        variances.push(v);
    }
    let avg_len = T::from_usize_lossy(total) / T::from_usize_lossy(sequences.len());
    let stay = (T::one() - T::from_usize_lossy(n) / avg_len).max(T::lit(0.5)).min(T::lit(0.95));
    let transition = (0..n)
        .map(|i| match topology {
            _ if n == 1 => vec![T::one()],
            HmmTopology::LeftToRight if i + 1 == n => (0..n).map(|j| if j == i { T::one() } else { T::zero() }).collect(),
            HmmTopology::LeftToRight => (0..n)
                .map(|j| if j == i { stay } else if j == i + 1 { T::one() - stay } else { T::zero() })
                .collect(),
            HmmTopology::Ergodic => {
                let off = (T::one() - stay) / T::from_usize_lossy(n - 1);
                (0..n).map(|j| if j == i { stay } else { off }).collect()
            }
        })
        .collect();
    let initial = match topology {
        HmmTopology::LeftToRight => (0..n).map(|i| if i == 0 { T::one() } else { T::zero() }).collect(),
        HmmTopology::Ergodic => vec![T::one() / T::from_usize_lossy(n); n],
    };
    HmmModel { topology, initial, transition, means, variances }
}

struct Stats<T> {
    loglik: T,
    initial: Vec<T>,
    transitions: Vec<Vec<T>>,
    occupancy: Vec<T>,
    weighted_sum: Vec<Vec<T>>,
    weighted_sq: Vec<Vec<T>>,
}

fn expectation<T: Scalar>(model: &HmmModel<T>, sequences: &[Vec<Vec<T>>]) -> Stats<T> {
    let n = model.n_states();
    let d = model.dim();
    let mut st = Stats {
        loglik: T::zero(),
        initial: vec![T::zero(); n],
        transitions: vec![vec![T::zero(); n]; n],
        occupancy: vec![T::zero(); n],
        weighted_sum: vec![vec![T::zero(); d]; n],
        weighted_sq: vec![vec![T::zero(); d]; n],
    };
    for seq in sequences {
        let logb = model.log_emissions(seq);
        let (alphas, log_c) = forward(model, &logb);
        st.loglik = st.loglik + log_c.iter().copied().sum();
        let len = seq.len();
        // emission likelihoods rescaled by the forward normalisers
        let scaled: Vec<Vec<T>> = logb
            .iter()
            .zip(&log_c)
            .map(|(lb, &c)| lb.iter().map(|&v| (v - c).min(T::lit(700.0)).exp()).collect())
            .collect();
        let mut beta = vec![T::one(); n];
        for t in (0..len).rev() {
            let mut gamma: Vec<T> = (0..n).map(|i| alphas[t][i] * beta[i]).collect();
            normalise(&mut gamma);
            for i in 0..n {
                let g = gamma[i];
                st.occupancy[i] = st.occupancy[i] + g;
                for f in 0..d {
                    let x = seq[t][f];
                    st.weighted_sum[i][f] = st.weighted_sum[i][f] + g * x;
                    st.weighted_sq[i][f] = st.weighted_sq[i][f] + g * x * x;
                }
            }
            if t == 0 {
                for i in 0..n {
                    st.initial[i] = st.initial[i] + gamma[i];
                }
                break;
            }
            let next: Vec<T> = (0..n).map(|j| scaled[t][j] * beta[j]).collect();
            let mut xi: Vec<Vec<T>> = (0..n)
                .map(|i| (0..n).map(|j| alphas[t - 1][i] * model.transition[i][j] * next[j]).collect())
                .collect();
            let z: T = xi.iter().flatten().copied().sum();
            if z > T::zero() {
                for (i, row) in xi.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        st.transitions[i][j] = st.transitions[i][j] + *v / z;
                    }
                }
            }
            beta = (0..n).map(|i| (0..n).map(|j| model.transition[i][j] * next[j]).sum()).collect();
            let top = beta.iter().copied().fold(T::zero(), T::max);
            if top > T::zero() {
                beta.iter_mut().for_each(|b| *b = *b / top);
            }
        }
    }
    st
}

fn normalise<T: Scalar>(v: &mut [T]) {
    let z: T = v.iter().copied().sum();
    if z > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / z);
    }
}

fn maximisation<T: Scalar>(old: &HmmModel<T>, st: &Stats<T>, floor: T) -> HmmModel<T> {
    let n = old.n_states();
    let mut model = old.clone();
    if old.topology == HmmTopology::Ergodic {
        model.initial = st.initial.clone();
        normalise(&mut model.initial);
    }
    for i in 0..n {
        let row_total: T = st.transitions[i].iter().copied().sum();
        if row_total > T::zero() {
            model.transition[i] = st.transitions[i].iter().map(|&v| v / row_total).collect();
        }
        let occ = st.occupancy[i];
        if occ > T::zero() {
            for f in 0..old.dim() {
                let mean = st.weighted_sum[i][f] / occ;
                model.means[i][f] = mean;
                model.variances[i][f] = (st.weighted_sq[i][f] / occ - mean * mean).max(floor);
            }
        }
    }
    model
}
