use gomkit_core::gom::kalman::StateSpace;
use nalgebra::{DMatrix, DVector};

/// Minimum summed Euclidean cost over every monotone warping path, by enumeration.
pub fn dtw_exhaustive(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn dist(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + dist(&a[i], &b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Ridge least squares `argmin |y - Xb|^2 + ridge |b|^2` by Householder QR of the augmented system.
pub fn ridge_ols_qr(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let (n, k) = (x.len(), x[0].len());
    let mut a = DMatrix::<f64>::zeros(n + k, k);
    let mut rhs = DVector::<f64>::zeros(n + k);
    for (i, row) in x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = v;
        }
        rhs[i] = y[i];
    }
    for j in 0..k {
        a[(n + j, j)] = ridge.sqrt();
    }
    let qr = a.qr();
    let qty = qr.q().transpose() * rhs;
    let r = qr.r();
    let sol = r.solve_upper_triangular(&qty.rows(0, k).into_owned()).expect("full rank");
    sol.iter().copied().collect()
}

/// Log-density of the observations under the explicit joint Gaussian of the state-space model.
pub fn dense_gaussian_loglik(ss: &StateSpace<f64>, inputs: &[Vec<f64>], obs: &[f64]) -> f64 {
    let n = ss.init_mean.len();
    let len = obs.len();
    let mat = |m: &gomkit_core::linalg::Matrix<f64>| DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let f = mat(&ss.transition);
    let q = mat(&ss.process_cov);
    let p0 = mat(&ss.init_cov);
    let z = DVector::from_column_slice(&ss.observation);
    let mut pow = vec![DMatrix::<f64>::identity(n, n)];
    for k in 1..=len {
        pow.push(&pow[k - 1] * &f);
    }
    let mut mean = DVector::<f64>::zeros(len);
    for t in 1..=len {
        let mut x = &pow[t] * DVector::from_column_slice(&ss.init_mean);
        for s in 1..=t {
            x += &pow[t - s] * DVector::from_column_slice(&inputs[s - 1]);
        }
        mean[t - 1] = z.dot(&x);
    }
    let mut cov = DMatrix::<f64>::zeros(len, len);
    for t in 1..=len {
        for u in 1..=len {
            let mut c = &pow[t] * &p0 * pow[u].transpose();
            for s in 1..=t.min(u) {
                c += &pow[t - s] * &q * pow[u - s].transpose();
            }
            cov[(t - 1, u - 1)] = z.dot(&(&c * &z)) + if t == u { ss.obs_var } else { 0.0 };
        }
    }
    let resid = DVector::from_column_slice(obs) - mean;
    let chol = cov.cholesky().expect("positive definite joint covariance");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = resid.dot(&chol.solve(&resid));
    -0.5 * (len as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

/// HMM sequence log-probability by summing over every state path.
pub fn hmm_path_sum(
    initial: &[f64],
    transition: &[Vec<f64>],
    means: &[Vec<f64>],
    variances: &[Vec<f64>],
    seq: &[Vec<f64>],
) -> f64 {
    let n = initial.len();
    let density = |i: usize, x: &[f64]| -> f64 {
        x.iter()
            .zip(&means[i])
            .zip(&variances[i])
            .map(|((x, m), v)| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
            .product()
    };
    let mut total = 0.0;
    let mut path = vec![0usize; seq.len()];
    loop {
        let mut p = initial[path[0]] * density(path[0], &seq[0]);
        for t in 1..seq.len() {
            p *= transition[path[t - 1]][path[t]] * density(path[t], &seq[t]);
        }
        total += p;
        // odometer increment over n^T paths
        let mut k = 0;
        loop {
            if k == seq.len() {
                return total.ln();
            }
            path[k] += 1;
            if path[k] < n {
                break;
            }
            path[k] = 0;
            k += 1;
        }
    }
}

/// Amplitude of the `freq_hz` component of `x` by least squares on a sine/cosine pair.
pub fn tone_amplitude(x: &[f64], freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
    let a = DMatrix::from_fn(x.len(), 2, |t, j| if j == 0 { (w * t as f64).sin() } else { (w * t as f64).cos() });
    let coef = (a.transpose() * &a).cholesky().expect("independent basis").solve(&(a.transpose() * DVector::from_column_slice(x)));
    coef.norm()
}

/// Butterworth low-pass power gain from the bilinear-transform prototype.
pub fn butterworth_power_gain(order: usize, cutoff_hz: f64, sample_rate_hz: f64, freq_hz: f64) -> f64 {
    let warp = |f: f64| (std::f64::consts::PI * f / sample_rate_hz).tan();
    1.0 / (1.0 + (warp(freq_hz) / warp(cutoff_hz)).powi(2 * order as i32))
}
