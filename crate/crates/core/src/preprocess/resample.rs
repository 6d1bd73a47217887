//! Windowed-sinc decimation.

use std::f64::consts::PI;

use crate::preprocess::PreprocessError;
use crate::scalar::Scalar;

/// Taps per side of the interpolation kernel at ratio 1; the width grows
/// with the decimation ratio to keep the stopband attenuation.
const BASE_HALF_WIDTH: usize = 32;

/// Downsamples by windowed-sinc interpolation, with the kernel cutoff at
/// 0.9 of the destination Nyquist acting as the anti-alias filter. Output
/// length is `round(len * dst / src)`. Each output sample is normalized by
/// the in-range kernel mass, so constants are preserved exactly.
pub fn resample<T: Scalar>(samples: &[T], src_rate: u32, dst_rate: u32) -> Result<Vec<T>, PreprocessError> {
    if dst_rate == 0 || src_rate == 0 {
        return Err(PreprocessError::UpsampleUnsupported {
            src: src_rate,
            dst: dst_rate,
        });
    }
    if src_rate < dst_rate {
        return Err(PreprocessError::UpsampleUnsupported {
            src: src_rate,
            dst: dst_rate,
        });
    }
    if src_rate == dst_rate {
        return Ok(samples.to_vec());
    }

    let ratio = src_rate as f64 / dst_rate as f64;
    // Cutoff in cycles per *input* sample: 0.9 * (dst/2) / src.
    let cutoff = 0.45 * dst_rate as f64 / src_rate as f64;
    let half_width = (BASE_HALF_WIDTH as f64 * ratio).ceil() as isize;
    let out_len = (samples.len() as f64 * dst_rate as f64 / src_rate as f64).round() as usize;

    let x: Vec<f64> = samples.iter().map(|&v| v.to_f64()).collect();
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let center = n as f64 * ratio;
        let k_lo = (center.ceil() as isize - half_width).max(0);
        let k_hi = (center.floor() as isize + half_width).min(x.len() as isize - 1);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for k in k_lo..=k_hi {
            let d = center - k as f64;
            let w = windowed_sinc(d, cutoff, half_width as f64);
            acc += w * x[k as usize];
            mass += w;
        }
        out.push(T::from_f64(if mass.abs() > 1e-30 { acc / mass } else { 0.0 }));
    }
    Ok(out)
}

#[inline]
fn windowed_sinc(d: f64, cutoff: f64, half_width: f64) -> f64 {
    let t = d / half_width;
    if t.abs() >= 1.0 {
        return 0.0;
    }
    // Hamming window over the kernel support.
    let window = 0.54 + 0.46 * (PI * t).cos();
    let arg = 2.0 * cutoff * d;
    let sinc = if arg.abs() < 1e-12 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
    2.0 * cutoff * sinc * window
}
