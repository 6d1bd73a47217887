//! Butterworth filter design and zero-phase (forward-backward) filtering.
//!
//! Filters are designed from the analog low-pass prototype via the
//! band-pass (or low-pass) transform and the bilinear transform with
//! pre-warped edges, then applied forward and backward over an
//! odd-reflection-padded signal so the net phase response is zero.
//! Design and filtering run in `f64` regardless of the sample type.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::preprocess::PreprocessError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bandpass,
}

/// Band-pass specification. `order` counts the poles of the final
/// band-pass filter, so it must be even; the analog prototype has
/// `order / 2` poles.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    pub order: usize,
    pub kind: FilterKind,
}

impl FilterSpec {
    /// The pipeline default: 25-400 Hz, 4 poles.
    pub fn pcg_default() -> Self {
        FilterSpec {
            low_cut: 25.0,
            high_cut: 400.0,
            order: 4,
            kind: FilterKind::Bandpass,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), PreprocessError> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut && self.high_cut < nyquist) {
            return Err(PreprocessError::InvalidFilter(format!(
                "need 0 < low ({}) < high ({}) < nyquist ({nyquist})",
                self.low_cut, self.high_cut
            )));
        }
        if self.order < 2 || self.order % 2 != 0 {
            return Err(PreprocessError::InvalidFilter(format!(
                "order {} must be even and at least 2",
                self.order
            )));
        }
        Ok(())
    }
}

/// Zero-phase Butterworth band-pass. Output length equals input length.
pub fn bandpass<T: Scalar>(samples: &[T], spec: &FilterSpec, sample_rate: u32) -> Result<Vec<T>, PreprocessError> {
    spec.validate(sample_rate)?;
    let needed = 3 * spec.order;
    if samples.len() < needed {
        return Err(PreprocessError::SignalTooShort {
            len: samples.len(),
            needed,
        });
    }
    let (b, a) = butter_bandpass(spec.order / 2, spec.low_cut, spec.high_cut, sample_rate as f64);
    // Pad long enough for the slowest transient (the low edge) to die out.
    let settle = (4.0 * sample_rate as f64 / spec.low_cut).ceil() as usize;
    let pad = settle.max(3 * (a.len() - 1)).min(samples.len() - 1);
    Ok(filtfilt_cast(samples, &b, &a, pad))
}

/// Zero-phase Butterworth low-pass, used for envelope smoothing.
pub(crate) fn lowpass_zero_phase<T: Scalar>(
    samples: &[T],
    cutoff: f64,
    prototype_order: usize,
    sample_rate: u32,
) -> Result<Vec<T>, PreprocessError> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(PreprocessError::InvalidFilter(format!(
            "low-pass cutoff {cutoff} outside (0, {nyquist})"
        )));
    }
    let needed = 3 * prototype_order.max(2);
    if samples.len() < needed {
        return Err(PreprocessError::SignalTooShort {
            len: samples.len(),
            needed,
        });
    }
    let (b, a) = butter_lowpass(prototype_order, cutoff, sample_rate as f64);
    let settle = (4.0 * sample_rate as f64 / cutoff).ceil() as usize;
    let pad = settle.max(3 * (a.len() - 1)).min(samples.len() - 1);
    Ok(filtfilt_cast(samples, &b, &a, pad))
}

fn filtfilt_cast<T: Scalar>(samples: &[T], b: &[f64], a: &[f64], pad: usize) -> Vec<T> {
    let x: Vec<f64> = samples.iter().map(|&v| v.to_f64()).collect();
    filtfilt(&x, b, a, pad).into_iter().map(T::from_f64).collect()
}

/// Analog Butterworth low-pass prototype poles (cutoff 1 rad/s).
fn butter_prototype(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n as f64 + 1.0) / (2.0 * n as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Bilinear pre-warp of an edge frequency in Hz to rad/s.
fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn lp2bp(prototype: &[Complex64], w_low: f64, w_high: f64) -> Zpk {
    let w0 = (w_low * w_high).sqrt();
    let bw = w_high - w_low;
    let mut poles = Vec::with_capacity(prototype.len() * 2);
    for &p in prototype {
        let s = p * (bw / 2.0);
        let d = (s * s - Complex64::new(w0 * w0, 0.0)).sqrt();
        poles.push(s + d);
        poles.push(s - d);
    }
    Zpk {
        zeros: vec![Complex64::new(0.0, 0.0); prototype.len()],
        poles,
        gain: bw.powi(prototype.len() as i32),
    }
}

fn lp2lp(prototype: &[Complex64], w_c: f64) -> Zpk {
    Zpk {
        zeros: Vec::new(),
        poles: prototype.iter().map(|&p| p * w_c).collect(),
        gain: w_c.powi(prototype.len() as i32),
    }
}

/// Maps analog zeros/poles/gain to the digital plane with `z = (2fs + s) / (2fs - s)`.
fn bilinear(analog: &Zpk, fs: f64) -> Zpk {
    let fs2 = Complex64::new(2.0 * fs, 0.0);
    let zeros: Vec<Complex64> = analog.zeros.iter().map(|&z| (fs2 + z) / (fs2 - z)).collect();
    let mut poles = Vec::with_capacity(analog.poles.len());
    let mut num = Complex64::new(1.0, 0.0);
    let mut den = Complex64::new(1.0, 0.0);
    for &z in &analog.zeros {
        num *= fs2 - z;
    }
    for &p in &analog.poles {
        den *= fs2 - p;
        poles.push((fs2 + p) / (fs2 - p));
    }
    let mut zeros = zeros;
    // Zeros at analog infinity land at z = -1.
    zeros.resize(analog.poles.len(), Complex64::new(-1.0, 0.0));
    Zpk {
        zeros,
        poles,
        gain: analog.gain * (num / den).re,
    }
}

/// Expands `prod (x - r_i)` into real polynomial coefficients, highest
/// power first. Roots must come in conjugate pairs (or be real).
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        coeffs.push(Complex64::new(0.0, 0.0));
        for i in (1..coeffs.len()).rev() {
            let prev = coeffs[i - 1];
            coeffs[i] -= r * prev;
        }
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

fn zpk_to_tf(zpk: &Zpk) -> (Vec<f64>, Vec<f64>) {
    let b: Vec<f64> = poly_from_roots(&zpk.zeros).into_iter().map(|c| c * zpk.gain).collect();
    let a = poly_from_roots(&zpk.poles);
    (b, a)
}

fn butter_bandpass(prototype_order: usize, low: f64, high: f64, fs: f64) -> (Vec<f64>, Vec<f64>) {
    let proto = butter_prototype(prototype_order);
    let analog = lp2bp(&proto, prewarp(low, fs), prewarp(high, fs));
    zpk_to_tf(&bilinear(&analog, fs))
}

fn butter_lowpass(order: usize, cutoff: f64, fs: f64) -> (Vec<f64>, Vec<f64>) {
    let proto = butter_prototype(order);
    let analog = lp2lp(&proto, prewarp(cutoff, fs));
    zpk_to_tf(&bilinear(&analog, fs))
}

/// Direct-form II transposed IIR filter, `a[0]` assumed 1 (enforced by
/// normalization).
fn lfilter(x: &[f64], b: &[f64], a: &[f64]) -> Vec<f64> {
    let a0 = a[0];
    let b: Vec<f64> = b.iter().map(|v| v / a0).collect();
    let a: Vec<f64> = a.iter().map(|v| v / a0).collect();
    let n = a.len().max(b.len());
    let mut state = vec![0.0; n - 1];
    let mut y = Vec::with_capacity(x.len());
    for &xv in x {
        let yv = b[0] * xv + state[0];
        for i in 0..n - 1 {
            let next = if i + 1 < n - 1 { state[i + 1] } else { 0.0 };
            let bt = if i + 1 < b.len() { b[i + 1] } else { 0.0 };
            let at = if i + 1 < a.len() { a[i + 1] } else { 0.0 };
            state[i] = next + bt * xv - at * yv;
        }
        y.push(yv);
    }
    y
}

/// Forward-backward filtering over an odd-reflection-padded copy.
fn filtfilt(x: &[f64], b: &[f64], a: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let mut y = lfilter(&ext, b, a);
    y.reverse();
    let mut y = lfilter(&y, b, a);
    y.reverse();
    y[pad..pad + n].to_vec()
}
