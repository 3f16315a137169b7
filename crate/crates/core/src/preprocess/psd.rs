//! Welch periodogram and PSD-based cutoff selection.

use super::PreprocessError;
use crate::scalar::Scalar;

pub const WELCH_SEGMENT: usize = 256;
pub const MIN_CUTOFF_SERIES: usize = 64;
pub const CUMULATIVE_POWER: f64 = 0.99;
pub const CUTOFF_FLOOR_HZ: f64 = 1.0;
pub const CUTOFF_CEIL_HZ: f64 = 20.0;

/// One-sided Welch power spectrum: Hann window, 50% overlap, no detrending.
///
/// Returns `(frequencies, power)`; the scale is relative (only ratios are used).
pub fn welch<T: Scalar>(series: &[T], sample_rate_hz: T) -> (Vec<T>, Vec<T>) {
    let n = series.len();
    let seg = WELCH_SEGMENT.min(n);
    let step = (seg / 2).max(1);
    let tau = T::lit(std::f64::consts::TAU);
    let seg_t = T::from_usize_lossy(seg);
    let window: Vec<T> = (0..seg)
        .map(|i| T::lit(0.5) - T::lit(0.5) * (tau * T::from_usize_lossy(i) / seg_t).cos())
        .collect();
    let bins = seg / 2 + 1;
    let mut power = vec![T::zero(); bins];
    let mut start = 0;
    while start + seg <= n {
        let chunk = &series[start..start + seg];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (T::zero(), T::zero());
            let w = tau * T::from_usize_lossy(k) / seg_t;
            for (i, (&x, &h)) in chunk.iter().zip(&window).enumerate() {
                let phase = w * T::from_usize_lossy(i);
                let v = x * h;
                re = re + v * phase.cos();
                im = im - v * phase.sin();
            }
            let mut pk = re * re + im * im;
            // one-sided spectrum: fold the negative frequencies
            if k != 0 && !(seg.is_multiple_of(2) && k == seg / 2) {
                pk = pk + pk;
            }
            *p = *p + pk;
        }
        start += step;
    }
    let freqs = (0..bins)
        .map(|k| T::from_usize_lossy(k) * sample_rate_hz / seg_t)
        .collect();
    (freqs, power)
}

/// Smallest frequency holding 99% of cumulative Welch power, clamped to [1, 20] Hz.
pub fn select_cutoff<T: Scalar>(series: &[T], sample_rate_hz: T) -> Result<T, PreprocessError> {
    if series.len() < MIN_CUTOFF_SERIES {
        return Err(PreprocessError::TooShort { needed: MIN_CUTOFF_SERIES, got: series.len() });
    }
    let (freqs, power) = welch(series, sample_rate_hz);
    let total: T = power.iter().copied().sum();
    let floor = T::lit(CUTOFF_FLOOR_HZ);
    let ceil = T::lit(CUTOFF_CEIL_HZ);
    if !(total > T::zero()) {
        return Ok(floor);
    }
    let target = total * T::lit(CUMULATIVE_POWER);
    let mut acc = T::zero();
    let mut cutoff = *freqs.last().expect("at least one bin");
    for (f, p) in freqs.iter().zip(&power) {
        acc = acc + *p;
        if acc >= target {
            cutoff = *f;
            break;
        }
    }
    Ok(cutoff.max(floor).min(ceil))
}
