//! Zero-phase Butterworth low-pass filtering.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Default filter order; applied forward and backward the effective order doubles.
pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec<T> {
    pub order: usize,
    pub cutoff_hz: T,
    pub sample_rate_hz: T,
}

impl<T: Scalar> FilterSpec<T> {
    pub fn new(order: usize, cutoff_hz: T, sample_rate_hz: T) -> Result<Self, PreprocessError> {
        let spec = Self { order, cutoff_hz, sample_rate_hz };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let nyquist = self.sample_rate_hz / T::lit(2.0);
        if self.order == 0 {
            return Err(PreprocessError::Spec("filter order must be positive".into()));
        }
        if !(self.sample_rate_hz > T::zero()) || !(self.cutoff_hz > T::zero()) || !(self.cutoff_hz < nyquist) {
            return Err(PreprocessError::Spec(format!(
                "cutoff {} Hz must lie in (0, {}) for sampling at {} Hz",
                self.cutoff_hz, nyquist, self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Prewarped analog cutoff for the bilinear transform, `tan(pi fc / fs)`.
    pub fn warped_cutoff(&self) -> T {
        (T::lit(std::f64::consts::PI) * self.cutoff_hz / self.sample_rate_hz).tan()
    }
}

/// One biquad in direct form II transposed, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Scalar> Biquad<T> {
    fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    /// Delay-line state that makes a constant input `x0` pass without transient.
    fn steady_state(&self, x0: T) -> [T; 2] {
        let y0 = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y0;
        let z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [T], mut z: [T; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass as cascaded second-order sections.
pub fn design_lowpass<T: Scalar>(spec: &FilterSpec<T>) -> Result<Vec<Biquad<T>>, PreprocessError> {
    spec.validate()?;
    let k = spec.warped_cutoff();
    let k2 = k * k;
    let two = T::lit(2.0);
    let n = spec.order;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for i in 0..n / 2 {
        let theta = T::lit(std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64);
        // 1/Q for this conjugate pole pair
        let inv_q = two * theta.sin();
        let norm = T::one() / (T::one() + k * inv_q + k2);
        let b0 = k2 * norm;
        sections.push(Biquad {
            b: [b0, two * b0, b0],
            a: [two * (k2 - T::one()) * norm, (T::one() - k * inv_q + k2) * norm],
        });
    }
    if n % 2 == 1 {
        let norm = T::one() / (k + T::one());
        sections.push(Biquad { b: [k * norm, k * norm, T::zero()], a: [(k - T::one()) * norm, T::zero()] });
    }
    Ok(sections)
}

/// Squared magnitude of one filtering pass at `freq_hz`: `1 / (1 + (tan(pi f/fs)/K)^(2n))`.
pub fn magnitude_squared<T: Scalar>(spec: &FilterSpec<T>, freq_hz: T) -> T {
    let w = (T::lit(std::f64::consts::PI) * freq_hz / spec.sample_rate_hz).tan() / spec.warped_cutoff();
    T::one() / (T::one() + w.powi(2 * spec.order as i32))
}

fn cascade<T: Scalar>(sections: &[Biquad<T>], x: &mut [T]) {
    let mut level = x[0];
    for s in sections {
        let z = s.steady_state(level);
        level = s.dc_gain() * level;
        s.run(x, z);
    }
}

/// Forecasts `count` samples past the end of `series` with a least-squares
/// linear predictor; `None` when the fit is singular or the forecast runs away.
fn predict_tail<T: Scalar>(series: &[T], count: usize) -> Option<Vec<T>> {
    let n = series.len();
    let p = (n / 4).min(16);
    if p < 2 {
        return None;
    }
    let mean = series.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let d: Vec<T> = series.iter().map(|&v| v - mean).collect();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    for t in p..n {
        for i in 0..p {
            rhs[i] = rhs[i] + d[t - 1 - i] * d[t];
            for j in 0..p {
                gram[(i, j)] = gram[(i, j)] + d[t - 1 - i] * d[t - 1 - j];
            }
        }
    }
    let trace = gram.diagonal().into_iter().sum::<T>();
    if !(trace > T::zero()) {
        return None;
    }
    for i in 0..p {
        gram[(i, i)] = gram[(i, i)] + trace * T::lit(1e-12);
    }
    let coef = Cholesky::new(&gram).ok()?.solve(&rhs);
    let bound = d.iter().fold(T::zero(), |m, v| m.max(v.abs())) * T::lit(4.0);
    let mut hist = d[n - p..].to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let next = coef.iter().zip(hist.iter().rev()).map(|(&a, &h)| a * h).sum::<T>();
        if !next.is_finite() || next.abs() > bound {
            return None;
        }
        hist.remove(0);
        hist.push(next);
        out.push(next + mean);
    }
    Some(out)
}

/// Forward-backward Butterworth low-pass.
///
/// Ends are padded with a linear-prediction forecast long enough for the
/// start-up transient to die out, or by odd reflection when no stable
/// forecast exists.
pub fn butterworth_lowpass<T: Scalar>(series: &[T], spec: &FilterSpec<T>) -> Result<Vec<T>, PreprocessError> {
    let sections = design_lowpass(spec)?;
    let n = series.len();
    if n <= 3 * spec.order {
        return Err(PreprocessError::Spec(format!(
            "series of {n} samples is too short for order {} (need more than {})",
            spec.order,
            3 * spec.order
        )));
    }
    let settle = (spec.sample_rate_hz / spec.cutoff_hz * T::lit(6.0)).to_f64_lossy().ceil() as usize;
    let long = settle.max(3 * (2 * sections.len() + 1));
    let reversed: Vec<T> = series.iter().rev().copied().collect();
    let (head, tail) = match (predict_tail(&reversed, long), predict_tail(series, long)) {
        (Some(head), Some(tail)) => (head, tail),
        _ => {
            let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
            let two = T::lit(2.0);
            let (first, last) = (series[0], series[n - 1]);
            (
                (1..=pad).map(|i| two * first - series[i]).collect(),
                (1..=pad).map(|i| two * last - series[n - 1 - i]).collect(),
            )
        }
    };
    let pad = head.len();
    let mut ext = Vec::with_capacity(n + pad + tail.len());
    ext.extend(head.into_iter().rev());
    ext.extend_from_slice(series);
    ext.extend(tail);

    cascade(&sections, &mut ext);
    ext.reverse();
    cascade(&sections, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(cutoff: f64) -> FilterSpec<f64> {
        FilterSpec::new(4, cutoff, 90.0).unwrap()
    }

    #[test]
    fn constant_passes_unchanged() {
        let x = vec![37.25; 200];
        let y = butterworth_lowpass(&x, &spec(5.0)).unwrap();
        for v in y {
            assert!((v - 37.25).abs() < 1e-10);
        }
    }

    #[test]
    fn biquads_match_analytic_response() {
        let s = spec(5.0);
        let sections = design_lowpass(&s).unwrap();
        for f in [0.5, 2.0, 5.0, 10.0, 30.0] {
            let w = 2.0 * std::f64::consts::PI * f / 90.0;
            let (c, si) = (w.cos(), w.sin());
            let mut mag2 = 1.0;
            for q in &sections {
                // H(e^jw) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
                let (c2, s2) = ((2.0 * w).cos(), (2.0 * w).sin());
                let nr = q.b[0] + q.b[1] * c + q.b[2] * c2;
                let ni = -q.b[1] * si - q.b[2] * s2;
                let dr = 1.0 + q.a[0] * c + q.a[1] * c2;
                let di = -q.a[0] * si - q.a[1] * s2;
                mag2 *= (nr * nr + ni * ni) / (dr * dr + di * di);
            }
            assert!((mag2 - magnitude_squared(&s, f)).abs() < 1e-12, "f={f}");
        }
        assert!((magnitude_squared(&s, 5.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn odd_order_has_unit_dc_gain() {
        let s = FilterSpec::new(3, 8.0, 90.0).unwrap();
        let y = butterworth_lowpass(&[2.0_f64; 50], &s).unwrap();
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn rejects_short_series_and_bad_spec() {
        assert!(matches!(butterworth_lowpass(&[0.0; 12], &spec(5.0)), Err(PreprocessError::Spec(_))));
        assert!(FilterSpec::new(4, 45.0, 90.0).is_err());
        assert!(FilterSpec::new(0, 5.0, 90.0).is_err());
    }

    #[test]
    fn zero_phase_keeps_peak_position() {
        let x: Vec<f64> = (0..400).map(|t| (-((t as f64 - 200.0) / 20.0).powi(2)).exp()).collect();
        let y = butterworth_lowpass(&x, &spec(6.0)).unwrap();
        let argmax = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 200);
    }
}
