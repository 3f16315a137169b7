//! Linear-Gaussian state-space likelihood: Kalman prediction-error
//! decomposition, and a dense joint-Gaussian evaluation used to check it.

use super::GomError;
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Longest observation sequence the dense evaluator accepts.
pub const DENSE_MAX_OBS: usize = 12;

/// Time-invariant model with a per-step additive state input:
///
/// ```text
/// x_t = F x_{t-1} + c_t + w_t,   w_t ~ N(0, Q)
/// y_t = z' x_t + v_t,            v_t ~ N(0, r)
/// x_0 ~ N(m0, P0)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T> {
    pub transition: Matrix<T>,
    pub observation: Vec<T>,
    pub process_cov: Matrix<T>,
    pub obs_var: T,
    pub init_mean: Vec<T>,
    pub init_cov: Matrix<T>,
}

impl<T: Scalar> StateSpace<T> {
    fn dim(&self) -> usize {
        self.init_mean.len()
    }

    fn check(&self, inputs: &[Vec<T>], obs: &[T]) -> Result<(), GomError> {
        let n = self.dim();
        let shapes_ok = self.transition.rows() == n
            && self.transition.cols() == n
            && self.observation.len() == n
            && self.process_cov.rows() == n
            && self.init_cov.rows() == n;
        if !shapes_ok {
            return Err(GomError::Dimension("state-space matrices disagree on the state dimension".into()));
        }
        if inputs.len() != obs.len() || inputs.iter().any(|c| c.len() != n) {
            return Err(GomError::Dimension(format!(
                "{} inputs for {} observations of a {n}-state model",
                inputs.len(),
                obs.len()
            )));
        }
        Ok(())
    }
}

fn gaussian_term<T: Scalar>(innovation: T, var: T) -> T {
    let ln_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
    -T::lit(0.5) * (ln_2pi + var.ln() + innovation * innovation / var)
}

/// Log-likelihood of `obs` by the Kalman filter.
pub fn kalman_loglik<T: Scalar>(ss: &StateSpace<T>, inputs: &[Vec<T>], obs: &[T]) -> Result<T, GomError> {
    ss.check(inputs, obs)?;
    let n = ss.dim();
    let f = &ss.transition;
    let ft = f.transpose();
    let z = &ss.observation;
    let mut m = ss.init_mean.clone();
    let mut p = ss.init_cov.clone();
    let mut ll = T::zero();
    for (c, &y) in inputs.iter().zip(obs) {
        m = f.matvec(&m).into_iter().zip(c).map(|(a, &b)| a + b).collect();
        p = f.matmul(&p).matmul(&ft).add(&ss.process_cov);
        let pz = p.matvec(z);
        let s = z.iter().zip(&pz).map(|(&a, &b)| a * b).sum::<T>() + ss.obs_var;
        if !(s > T::zero()) {
            return Err(GomError::Singular { descriptor: String::new(), reason: "non-positive innovation variance".into() });
        }
        let v = y - z.iter().zip(&m).map(|(&a, &b)| a * b).sum::<T>();
        ll = ll + gaussian_term(v, s);
        let gain: Vec<T> = pz.iter().map(|&g| g / s).collect();
        for i in 0..n {
            m[i] = m[i] + gain[i] * v;
        }
        let mut next = p.clone();
        for i in 0..n {
            for j in 0..n {
                next[(i, j)] = p[(i, j)] - gain[i] * pz[j];
            }
        }
        // keep P symmetric against rounding drift
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = (next[(i, j)] + next[(j, i)]) * T::lit(0.5);
                next[(i, j)] = avg;
                next[(j, i)] = avg;
            }
        }
        p = next;
    }
    Ok(ll)
}

/// Exact log-density of `obs` from the explicit joint mean and covariance.
pub fn dense_loglik<T: Scalar>(ss: &StateSpace<T>, inputs: &[Vec<T>], obs: &[T]) -> Result<T, GomError> {
    ss.check(inputs, obs)?;
    let len = obs.len();
    if len > DENSE_MAX_OBS {
        return Err(GomError::TooLong { max: DENSE_MAX_OBS, got: len });
    }
    if len == 0 {
        return Ok(T::zero());
    }
    let n = ss.dim();
    let f = &ss.transition;
    // powers[k] = F^k
    let mut powers = vec![Matrix::identity(n)];
    for k in 1..=len {
        powers.push(powers[k - 1].matmul(f));
    }
    let zrow = Matrix::from_rows(1, n, ss.observation.clone());
    let zcol = zrow.transpose();

    // mean of x_t: F^t m0 + sum_{s<=t} F^{t-s} c_s
    let mut mean = vec![T::zero(); len];
    for t in 1..=len {
        let mut x = powers[t].matvec(&ss.init_mean);
        for s in 1..=t {
            let add = powers[t - s].matvec(&inputs[s - 1]);
            x.iter_mut().zip(add).for_each(|(a, b)| *a = *a + b);
        }
        mean[t - 1] = ss.observation.iter().zip(&x).map(|(&a, &b)| a * b).sum();
    }

    let mut cov = Matrix::zeros(len, len);
    for t in 1..=len {
        for u in t..=len {
            let mut block = powers[t].matmul(&ss.init_cov).matmul(&powers[u].transpose());
            for s in 1..=t {
                let term = powers[t - s].matmul(&ss.process_cov).matmul(&powers[u - s].transpose());
                block = block.add(&term);
            }
            let mut v = zrow.matmul(&block).matmul(&zcol)[(0, 0)];
            if t == u {
                v = v + ss.obs_var;
            }
            cov[(t - 1, u - 1)] = v;
            cov[(u - 1, t - 1)] = v;
        }
    }
    let chol = Cholesky::new(&cov).map_err(|e| GomError::Singular {
        descriptor: String::new(),
        reason: format!("joint covariance not positive definite at pivot {}", e.pivot),
    })?;
    let resid: Vec<T> = obs.iter().zip(&mean).map(|(&y, &m)| y - m).collect();
    let white = chol.solve_lower(&resid);
    let quad: T = white.iter().map(|&w| w * w).sum();
    let ln_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
    Ok(-T::lit(0.5) * (T::from_usize_lossy(len) * ln_2pi + chol.log_det() + quad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(phi: f64, q: f64, r: f64) -> StateSpace<f64> {
        StateSpace {
            transition: Matrix::from_rows(1, 1, vec![phi]),
            observation: vec![1.0],
            process_cov: Matrix::from_rows(1, 1, vec![q]),
            obs_var: r,
            init_mean: vec![0.5],
            init_cov: Matrix::from_rows(1, 1, vec![2.0]),
        }
    }

    #[test]
    fn single_observation_is_one_gaussian() {
        let ss = scalar_model(0.8, 0.3, 0.2);
        let (c, y) = (0.1, 1.7);
        // predicted mean 0.8*0.5 + 0.1, variance 0.64*2 + 0.3 + 0.2
        let (mu, var) = (0.5, 1.78_f64);
        let expected = -0.5 * ((2.0 * std::f64::consts::PI).ln() + var.ln() + (y - mu) * (y - mu) / var);
        let k = kalman_loglik(&ss, &[vec![c]], &[y]).unwrap();
        let d = dense_loglik(&ss, &[vec![c]], &[y]).unwrap();
        assert!((k - expected).abs() < 1e-12);
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_observation_of_known_state_adds_nothing_after_first_step() {
        // with P0 = 0 and Q = 0 every observation is deterministic except for r
        let ss = scalar_model(0.5, 0.0, 1.0);
        let ss = StateSpace { init_cov: Matrix::zeros(1, 1), ..ss };
        let obs = [0.25, 0.125, 0.0625];
        let ll = kalman_loglik(&ss, &[vec![0.0], vec![0.0], vec![0.0]], &obs).unwrap();
        let expected = 3.0 * -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn mismatched_inputs() {
        let ss = scalar_model(0.5, 1.0, 1.0);
        assert!(matches!(kalman_loglik(&ss, &vec![vec![0.0]; 3], &[0.0; 4]), Err(GomError::Dimension(_))));
        assert!(matches!(dense_loglik(&ss, &vec![vec![0.0]; 13], &[0.0; 13]), Err(GomError::TooLong { .. })));
    }
}
