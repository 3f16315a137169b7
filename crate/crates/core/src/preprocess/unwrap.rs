//! Removal of ±180° Euler-angle wrap jumps with an invertible log.
//!
//! A jump of more than 180° between consecutive frames is treated as a wrap
//! and compensated with a ±360° offset that persists until the next wrap.
//! Transformed values must stay within ±250°.
//!
//! In binary floating point `(x + 360) - 360` is not always `x`, so the log
//! also keeps the rounding residual of every shifted frame. With it the
//! inversion is exact: `y - offset` is exact (the operands are within a factor
//! of two of each other) and adding the residual back restores `x` bit for bit.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::scalar::Scalar;

pub const WRAP_THRESHOLD_DEG: f64 = 180.0;
pub const OUTPUT_BOUND_DEG: f64 = 250.0;
pub const UNWRAP_LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UnwrapLog<T> {
    pub version: u32,
    #[serde(default)]
    pub channel: String,
    /// `[frame, added offset in degrees]`: the running offset changes by the
    /// given multiple of 360 starting at `frame`.
    pub corrections: Vec<(usize, i64)>,
    /// `[frame, residual]` for shifted frames whose offset addition rounded.
    #[serde(default)]
    pub residuals: Vec<(usize, T)>,
}

impl<T: Scalar> UnwrapLog<T> {
    pub fn is_identity(&self) -> bool {
        self.corrections.is_empty()
    }

    pub fn with_channel(mut self, channel: impl Into<String>) -> Self {
        self.channel = channel.into();
        self
    }

    fn offsets(&self, len: usize) -> Result<Vec<i64>, PreprocessError> {
        let mut out = vec![0_i64; len];
        let mut running = 0_i64;
        let mut next = self.corrections.iter().peekable();
        for (t, slot) in out.iter_mut().enumerate() {
            while let Some(&&(frame, delta)) = next.peek() {
                if frame != t {
                    break;
                }
                running += delta;
                next.next();
            }
            *slot = running;
        }
        if let Some(&(frame, _)) = next.next() {
            return Err(PreprocessError::Bounds(format!("unwrap log refers to frame {frame} of a {len}-frame series")));
        }
        Ok(out)
    }
}

/// Unwraps one angle channel (degrees in [-180, 180]).
pub fn unwrap_discontinuities<T: Scalar>(series: &[T]) -> Result<(Vec<T>, UnwrapLog<T>), PreprocessError> {
    let half = T::lit(WRAP_THRESHOLD_DEG);
    let full = T::lit(360.0);
    let bound = T::lit(OUTPUT_BOUND_DEG);
    if let Some((frame, v)) = series.iter().enumerate().find(|(_, v)| !(v.abs() <= half)) {
        return Err(PreprocessError::Range { frame, value: v.to_f64_lossy(), limit: WRAP_THRESHOLD_DEG });
    }
    let mut log = UnwrapLog { version: UNWRAP_LOG_VERSION, channel: String::new(), corrections: Vec::new(), residuals: Vec::new() };
    let mut out = Vec::with_capacity(series.len());
    let mut turns = 0_i64;
    for (t, &x) in series.iter().enumerate() {
        if t > 0 {
            let d = x - series[t - 1];
            let step = if d > half {
                -1
            } else if d < -half {
                1
            } else {
                0
            };
            if step != 0 {
                turns += step;
                log.corrections.push((t, 360 * step));
            }
        }
        if turns == 0 {
            out.push(x);
            continue;
        }
        let offset = full * T::from_i64(turns).expect("small integer");
        let y = x + offset;
        if !(y.abs() <= bound) {
            return Err(PreprocessError::Range { frame: t, value: y.to_f64_lossy(), limit: OUTPUT_BOUND_DEG });
        }
        let residual = x - (y - offset);
        if residual != T::zero() {
            log.residuals.push((t, residual));
        }
        out.push(y);
    }
    Ok((out, log))
}

/// Restores the original series from a transformed one and its log.
pub fn invert_unwrap<T: Scalar>(transformed: &[T], log: &UnwrapLog<T>) -> Result<Vec<T>, PreprocessError> {
    let offsets = log.offsets(transformed.len())?;
    let full = T::lit(360.0);
    let mut out: Vec<T> = transformed
        .iter()
        .zip(&offsets)
        .map(|(&y, &k)| if k == 0 { y } else { y - full * T::from_i64(k / 360).expect("small integer") })
        .collect();
    for &(frame, r) in &log.residuals {
        let slot = out
            .get_mut(frame)
            .ok_or_else(|| PreprocessError::Bounds(format!("residual for frame {frame} out of range")))?;
        *slot = *slot + r;
    }
    Ok(out)
}
