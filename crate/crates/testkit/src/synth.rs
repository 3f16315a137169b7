use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn gaussian_vec<R: Rng>(rng: &mut R, len: usize, sd: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sd).expect("valid sd");
    (0..len).map(|_| n.sample(rng)).collect()
}

/// `y_t = a1 y_{t-1} + a2 y_{t-2} + sum_j b_j u_{j,t-1} + e_t` with zero initial lags.
pub fn arx2<R: Rng>(rng: &mut R, alpha: [f64; 2], betas: &[f64], inputs: &[Vec<f64>], len: usize, sd: f64) -> Vec<f64> {
    let noise = gaussian_vec(rng, len, sd);
    let mut y = vec![0.0; len];
    for t in 2..len {
        let drive: f64 = betas.iter().zip(inputs).map(|(b, u)| b * u[t - 1]).sum();
        y[t] = alpha[0] * y[t - 1] + alpha[1] * y[t - 2] + drive + noise[t];
    }
    y
}

/// Stationary AR(1) series, handy as a smooth exogenous input.
pub fn ar1<R: Rng>(rng: &mut R, phi: f64, len: usize, sd: f64) -> Vec<f64> {
    let noise = gaussian_vec(rng, len, sd);
    let mut u = vec![0.0; len];
    for t in 1..len {
        u[t] = phi * u[t - 1] + noise[t];
    }
    u
}

/// Draws a sequence from a diagonal-Gaussian HMM.
pub fn sample_hmm<R: Rng>(
    rng: &mut R,
    initial: &[f64],
    transition: &[Vec<f64>],
    means: &[Vec<f64>],
    sds: &[Vec<f64>],
    len: usize,
) -> Vec<Vec<f64>> {
    let pick = |rng: &mut R, p: &[f64]| {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &q) in p.iter().enumerate() {
            acc += q;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    };
    let mut state = pick(rng, initial);
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            state = pick(rng, &transition[state]);
        }
        out.push(
            means[state]
                .iter()
                .zip(&sds[state])
                .map(|(&m, &s)| Normal::new(m, s).expect("valid sd").sample(rng))
                .collect(),
        );
    }
    out
}

/// Class-dependent piecewise-level sequences: `levels[k]` per temporal block, plus noise.
pub fn level_sequence<R: Rng>(rng: &mut R, levels: &[Vec<f64>], len: usize, sd: f64) -> Vec<Vec<f64>> {
    let n = Normal::new(0.0, sd).expect("valid sd");
    (0..len)
        .map(|t| levels[t * levels.len() / len].iter().map(|&m| m + n.sample(rng)).collect())
        .collect()
}
