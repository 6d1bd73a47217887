//! Spike removal over 500 ms windows.
//!
//! A window counts as spiky when its peak magnitude exceeds three times
//! the median of all per-window peak magnitudes. Inside a spiky window the
//! neighborhood of the peak — from the last zero-crossing before it to the
//! first after it — is zeroed; every other sample passes through
//! bit-identically.

use crate::scalar::Scalar;

pub fn remove_spikes<T: Scalar>(samples: &[T], sample_rate: u32) -> Vec<T> {
    assert!(!samples.is_empty(), "remove_spikes needs a non-empty signal");
    let window = (sample_rate as usize / 2).max(1);

    let maxima: Vec<T> = samples
        .chunks(window)
        .map(|chunk| chunk.iter().fold(T::zero(), |m, &v| m.max(v.abs())))
        .collect();
    let median = median_of(&maxima);
    let threshold = T::from_f64(3.0) * median;

    let mut out = samples.to_vec();
    for (w, chunk_max) in maxima.iter().enumerate() {
        if !(*chunk_max > threshold) {
            continue;
        }
        let start = w * window;
        let end = (start + window).min(samples.len());
        let mut peak = start;
        let mut best = T::zero();
        for (i, &v) in samples[start..end].iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                peak = start + i;
            }
        }
        let (lo, hi) = zero_crossing_span(samples, peak);
        for v in &mut out[lo..=hi] {
            *v = T::zero();
        }
    }
    out
}

/// Span around `peak` bounded by the nearest sign changes (inclusive).
fn zero_crossing_span<T: Scalar>(samples: &[T], peak: usize) -> (usize, usize) {
    let mut lo = peak;
    while lo > 0 && samples[lo - 1] * samples[lo] > T::zero() {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < samples.len() && samples[hi] * samples[hi + 1] > T::zero() {
        hi += 1;
    }
    (lo, hi)
}

fn median_of<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::from_f64(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_passes_through() {
        let x = vec![0.0f64; 3000];
        assert_eq!(remove_spikes(&x, 1000), x);
    }

    #[test]
    fn clean_sine_is_untouched() {
        let x: Vec<f64> = (0..4000)
            .map(|i| 0.1 * (2.0 * std::f64::consts::PI * 40.0 * i as f64 / 1000.0).sin())
            .collect();
        assert_eq!(remove_spikes(&x, 1000), x);
    }

    #[test]
    fn an_isolated_spike_neighborhood_is_zeroed() {
        // Noise floor alternating at 0.01 so zero crossings are dense,
        // one 1.0 spike in the middle of the second window.
        let n = 4000usize;
        let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let spike_at = 750usize;
        x[spike_at] = 1.0;

        let y = remove_spikes(&x, 1000);
        assert_eq!(y[spike_at], 0.0, "spike itself must be zeroed");

        let untouched = x
            .iter()
            .zip(&y)
            .filter(|(a, b)| a.to_bits() == b.to_bits())
            .count();
        assert!(
            untouched as f64 >= 0.99 * n as f64,
            "only {untouched} of {n} samples bit-identical"
        );

        // The zeroed span is bounded by the zero crossings right next to
        // the spike in this alternating signal.
        assert_ne!(y[spike_at - 2], 0.0);
        assert_ne!(y[spike_at + 2], 0.0);
    }

    #[test]
    fn median_handles_even_counts() {
        assert_eq!(median_of(&[1.0f64, 3.0, 2.0, 10.0]), 2.5);
        assert_eq!(median_of(&[5.0f64]), 5.0);
    }
}
