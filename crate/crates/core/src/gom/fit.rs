use std::collections::BTreeMap;

use rayon::prelude::*;

use super::kalman::{dense_loglik, kalman_loglik, StateSpace};
use super::{DescriptorFrames, GomError, GomModel, GomSystem, GomTopology, TermValues, TrainingMeta};
use crate::bvh::DescriptorId;
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Ridge added to the Gram matrix diagonal.
pub const RIDGE: f64 = 1e-8;
/// Relative pivot below which the own-lag block counts as rank deficient.
const LAG_PIVOT_TOL: f64 = 1e-12;

/// Two-sided normal p-value of a coefficient against zero.
fn p_value<T: Scalar>(coef: T, se: T) -> T {
    if se > T::zero() {
        let z = (coef / se).abs().to_f64_lossy();
        T::lit(statrs::function::erf::erfc(z / std::f64::consts::SQRT_2))
    } else if coef == T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

struct Design<'a, T> {
    target: &'a [T],
    regressors: Vec<&'a [T]>,
}

impl<T: Scalar> Design<'_, T> {
    fn row(&self, t: usize, out: &mut [T]) {
        out[0] = self.target[t - 1];
        out[1] = self.target[t - 2];
        for (slot, u) in out[2..].iter_mut().zip(&self.regressors) {
            *slot = u[t - 1];
        }
    }
}

/// Fits one descriptor equation by maximising its Gaussian likelihood.
pub fn fit_equation<T: Scalar>(
    frames: &DescriptorFrames<T>,
    topology: &GomTopology,
    descriptor: &DescriptorId,
) -> Result<GomModel<T>, GomError> {
    let name = descriptor.to_string();
    let target = frames
        .column(descriptor)
        .ok_or_else(|| GomError::Dimension(format!("reference lacks descriptor {descriptor}")))?;
    let regs = topology.regressors_of(descriptor);
    let regressors = regs
        .iter()
        .map(|(r, _)| frames.column(r).ok_or_else(|| GomError::Dimension(format!("reference lacks regressor {r}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let len = target.len();
    let needed = 3 + topology.widest_equation();
    if len < needed {
        return Err(GomError::Length { descriptor: name, needed, got: len });
    }
    let design = Design { target, regressors };
    let k = 2 + regs.len();
    let n = len - 2;

    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![T::zero(); k];
    let mut x = vec![T::zero(); k];
    for t in 2..len {
        design.row(t, &mut x);
        for i in 0..k {
            rhs[i] = rhs[i] + x[i] * target[t];
            for j in 0..k {
                gram[(i, j)] = gram[(i, j)] + x[i] * x[j];
            }
        }
    }

    let (g00, g11, g01) = (gram[(0, 0)], gram[(1, 1)], gram[(0, 1)]);
    let scale = g00 * g11;
    if !(scale > T::zero()) || !(scale - g01 * g01 > T::lit(LAG_PIVOT_TOL) * scale) {
        return Err(GomError::Singular { descriptor: name, reason: "own lags are constant or collinear".into() });
    }
    let mut ridged = gram.clone();
    for i in 0..k {
        ridged[(i, i)] = ridged[(i, i)] + T::lit(RIDGE);
    }
    let chol = Cholesky::new(&ridged).map_err(|e| GomError::Singular {
        descriptor: name.clone(),
        reason: format!("regularised Gram matrix not positive definite at pivot {}", e.pivot),
    })?;
    let coef = chol.solve(&rhs);

    let mut rss = T::zero();
    let mut mean_sq = T::zero();
    for t in 2..len {
        design.row(t, &mut x);
        let fitted: T = x.iter().zip(&coef).map(|(&a, &b)| a * b).sum();
        let e = target[t] - fitted;
        rss = rss + e * e;
        mean_sq = mean_sq + target[t] * target[t];
    }
    let n_t = T::from_usize_lossy(n);
    mean_sq = mean_sq / n_t;
    let floor = T::epsilon() * T::epsilon() * (T::one() + mean_sq);
    let sigma2 = (rss / n_t).max(floor);

    let cov_unscaled = chol.inverse();
    let se: Vec<T> = (0..k).map(|i| (sigma2 * cov_unscaled[(i, i)]).max(T::zero()).sqrt()).collect();
    let p: Vec<T> = coef.iter().zip(&se).map(|(&c, &s)| p_value(c, s)).collect();

    let by_regressor = |vals: &[T]| -> BTreeMap<DescriptorId, T> {
        regs.iter().zip(vals).map(|((r, _), &v)| (r.clone(), v)).collect()
    };
    let mut model = GomModel {
        descriptor: descriptor.clone(),
        alpha: [coef[0], coef[1]],
        betas: by_regressor(&coef[2..]),
        obs_noise_var: sigma2,
        p_values: TermValues { alpha: [p[0], p[1]], betas: by_regressor(&p[2..]) },
        std_errors: TermValues { alpha: [se[0], se[1]], betas: by_regressor(&se[2..]) },
        log_likelihood: T::zero(),
        observations: n,
    };
    let reg_series: BTreeMap<DescriptorId, Vec<T>> = regs
        .iter()
        .zip(&design.regressors)
        .map(|((r, _), u)| (r.clone(), u.to_vec()))
        .collect();
    model.log_likelihood = model_loglik(&model, target, &reg_series)?;
    Ok(model)
}

/// Fits every equation independently; one failure does not affect the others.
pub fn fit_each<T: Scalar>(
    reference: &DescriptorFrames<T>,
    topology: &GomTopology,
) -> BTreeMap<DescriptorId, Result<GomModel<T>, GomError>> {
    topology
        .descriptors
        .par_iter()
        .map(|d| (d.clone(), fit_equation(reference, topology, d)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Fits the whole equation bank on one reference repetition.
pub fn fit<T: Scalar>(reference: &DescriptorFrames<T>, topology: &GomTopology) -> Result<GomSystem<T>, GomError> {
    let mut models = BTreeMap::new();
    let mut failures = Vec::new();
    for (d, r) in fit_each(reference, topology) {
        match r {
            Ok(m) => {
                models.insert(d, m);
            }
            Err(e) => failures.push((d.to_string(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(GomError::Fit(failures));
    }
    GomSystem::new(
        topology.clone(),
        models,
        TrainingMeta { source: String::new(), reference_index: 0, frame_time: reference.frame_time },
    )
}

/// State-space form of one equation over `series`, conditioned on its first two values.
///
/// Returns the model and the per-step state inputs for observations `series[2..]`.
pub fn equation_state_space<T: Scalar>(
    model: &GomModel<T>,
    series: &[T],
    regressors: &BTreeMap<DescriptorId, Vec<T>>,
) -> Result<(StateSpace<T>, Vec<Vec<T>>), GomError> {
    if series.len() < 3 {
        return Err(GomError::Dimension("need at least three values (two lags and one observation)".into()));
    }
    for r in model.betas.keys() {
        let u = regressors
            .get(r)
            .ok_or_else(|| GomError::Dimension(format!("missing regressor series {r}")))?;
        if u.len() != series.len() {
            return Err(GomError::Dimension(format!("regressor {r} has {} values, series has {}", u.len(), series.len())));
        }
    }
    let zero = T::zero();
    let ss = StateSpace {
        transition: Matrix::from_rows(2, 2, vec![model.alpha[0], model.alpha[1], T::one(), zero]),
        observation: vec![T::one(), zero],
        process_cov: Matrix::from_rows(2, 2, vec![model.obs_noise_var, zero, zero, zero]),
        obs_var: zero,
        init_mean: vec![series[1], series[0]],
        init_cov: Matrix::zeros(2, 2),
    };
    let inputs = (2..series.len())
        .map(|t| {
            let drive: T = model.betas.iter().map(|(r, &b)| b * regressors[r][t - 1]).sum();
            vec![drive, zero]
        })
        .collect();
    Ok((ss, inputs))
}

/// Kalman-filter log-likelihood of `series` (first two values conditioned on).
pub fn model_loglik<T: Scalar>(
    model: &GomModel<T>,
    series: &[T],
    regressors: &BTreeMap<DescriptorId, Vec<T>>,
) -> Result<T, GomError> {
    let (ss, inputs) = equation_state_space(model, series, regressors)?;
    kalman_loglik(&ss, &inputs, &series[2..])
}

/// The same likelihood evaluated from the explicit joint Gaussian (at most 12 observations).
pub fn loglik_oracle<T: Scalar>(
    model: &GomModel<T>,
    series: &[T],
    regressors: &BTreeMap<DescriptorId, Vec<T>>,
) -> Result<T, GomError> {
    let (ss, inputs) = equation_state_space(model, series, regressors)?;
    dense_loglik(&ss, &inputs, &series[2..])
}
