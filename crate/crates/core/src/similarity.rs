//! Dynamic time warping and reference-repetition selection.

use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no repetitions to choose from")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult<T> {
    pub cost: T,
    /// Index pairs from `(0, 0)` to `(len_a - 1, len_b - 1)`.
    pub path: Vec<(usize, usize)>,
}

/// Euclidean distance between two frames.
pub fn frame_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

fn check_dims<T>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<usize, SimilarityError> {
    let d = a
        .first()
        .ok_or_else(|| SimilarityError::Dimension("first sequence is empty".into()))?
        .len();
    if b.is_empty() {
        return Err(SimilarityError::Dimension("second sequence is empty".into()));
    }
    if let Some(bad) = a.iter().chain(b).find(|f| f.len() != d) {
        return Err(SimilarityError::Dimension(format!("frame of width {} where {d} expected", bad.len())));
    }
    Ok(d)
}

/// Full (unconstrained) DTW with Euclidean local cost.
pub fn dtw<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<DtwResult<T>, SimilarityError> {
    check_dims(a, b)?;
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![T::infinity(); n * m];
    for i in 0..n {
        for j in 0..m {
            let local = frame_distance(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                T::zero()
            } else {
                let mut best = T::infinity();
                if i > 0 && j > 0 {
                    best = best.min(acc[(i - 1) * m + j - 1]);
                }
                if i > 0 {
                    best = best.min(acc[(i - 1) * m + j]);
                }
                if j > 0 {
                    best = best.min(acc[i * m + j - 1]);
                }
                best
            };
            acc[i * m + j] = best + local;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let mut step = None;
        let mut best = T::infinity();
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            if i >= di && j >= dj {
                let c = acc[(i - di) * m + j - dj];
                if c < best {
                    best = c;
                    step = Some((i - di, j - dj));
                }
            }
        }
        (i, j) = step.expect("a predecessor exists away from the origin");
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult { cost: acc[n * m - 1], path })
}

/// Index of the repetition with the smallest summed DTW cost to all others.
///
/// Ties resolve to the lowest index.
pub fn select_reference<T: Scalar>(repetitions: &[Vec<Vec<T>>]) -> Result<usize, SimilarityError> {
    if repetitions.is_empty() {
        return Err(SimilarityError::Empty);
    }
    let width = repetitions[0].first().map(Vec::len);
    for (k, rep) in repetitions.iter().enumerate() {
        if rep.is_empty() || rep.first().map(Vec::len) != width {
            return Err(SimilarityError::Dimension(format!("repetition {k} has a different descriptor width")));
        }
    }
    let costs = pairwise_costs(repetitions)?;
    let n = repetitions.len();
    let mut best = (0, T::infinity());
    for i in 0..n {
        let total: T = (0..n).map(|j| costs[i * n + j]).sum();
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok(best.0)
}

/// Symmetric `n × n` matrix (row-major) of DTW costs.
pub fn pairwise_costs<T: Scalar>(repetitions: &[Vec<Vec<T>>]) -> Result<Vec<T>, SimilarityError> {
    let n = repetitions.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let costs = pairs
        .par_iter()
        .map(|&(i, j)| dtw(&repetitions[i], &repetitions[j]).map(|r| r.cost))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = vec![T::zero(); n * n];
    for (&(i, j), &c) in pairs.iter().zip(&costs) {
        out[i * n + j] = c;
        out[j * n + i] = c;
    }
    Ok(out)
}
