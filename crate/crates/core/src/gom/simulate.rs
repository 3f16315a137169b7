use super::{GomError, GomSystem};
use crate::scalar::Scalar;

/// Simulated angles beyond this magnitude (degrees) mean the system is unstable.
pub const DIVERGENCE_LIMIT_DEG: f64 = 1e4;

struct Compiled<T> {
    alpha: [T; 2],
    drives: Vec<(usize, T)>,
}

fn compile<T: Scalar>(system: &GomSystem<T>) -> Vec<Compiled<T>> {
    let topo = &system.topology;
    topo.descriptors
        .iter()
        .map(|d| {
            let m = &system.models[d];
            Compiled {
                alpha: m.alpha,
                drives: m
                    .betas
                    .iter()
                    .map(|(r, &b)| (topo.index_of(r).expect("validated topology"), b))
                    .collect(),
            }
        })
        .collect()
}

fn step<T: Scalar>(eq: &Compiled<T>, own: usize, prev: &[T], prev2: &[T]) -> T {
    let lagged = eq.alpha[0] * prev[own] + eq.alpha[1] * prev2[own];
    eq.drives.iter().fold(lagged, |acc, &(j, b)| acc + b * prev[j])
}

fn check_width<T: Scalar>(system: &GomSystem<T>, rows: &[Vec<T>]) -> Result<usize, GomError> {
    let width = system.topology.descriptors.len();
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(GomError::Dimension(format!("frame has {} values, system has {width} descriptors", r.len())));
    }
    Ok(width)
}

/// Closed-loop generation: every step consumes only previously simulated frames.
///
/// `seed` holds the first two frames in topology descriptor order; the output
/// has `horizon` rows and starts with the seed.
pub fn simulate<T: Scalar>(system: &GomSystem<T>, seed: &[Vec<T>], horizon: usize) -> Result<Vec<Vec<T>>, GomError> {
    if seed.len() != 2 || horizon < 2 {
        return Err(GomError::Dimension("simulation needs exactly two seed frames and a horizon of at least 2".into()));
    }
    check_width(system, seed)?;
    if seed.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GomError::Dimension("seed frames must be finite".into()));
    }
    let eqs = compile(system);
    let limit = T::lit(DIVERGENCE_LIMIT_DEG);
    let mut out = Vec::with_capacity(horizon);
    out.extend_from_slice(seed);
    for t in 2..horizon {
        let next: Vec<T> = eqs
            .iter()
            .enumerate()
            .map(|(i, eq)| step(eq, i, &out[t - 1], &out[t - 2]))
            .collect();
        if let Some((i, v)) = next.iter().enumerate().find(|(_, v)| !(v.abs() <= limit)) {
            return Err(GomError::Divergence {
                descriptor: system.topology.descriptors[i].to_string(),
                step: t,
                value: v.to_f64_lossy(),
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// One-step-ahead predictions from recorded frames (diagnostic, teacher forced).
///
/// Row `t` predicts frame `t` from recorded frames `t-1` and `t-2`; rows 0 and 1 copy the input.
pub fn predict_open_loop<T: Scalar>(system: &GomSystem<T>, frames: &[Vec<T>]) -> Result<Vec<Vec<T>>, GomError> {
    check_width(system, frames)?;
    let eqs = compile(system);
    Ok((0..frames.len())
        .map(|t| {
            if t < 2 {
                frames[t].clone()
            } else {
                eqs.iter().enumerate().map(|(i, eq)| step(eq, i, &frames[t - 1], &frames[t - 2])).collect()
            }
        })
        .collect())
}
