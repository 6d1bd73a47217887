//! Heart-cycle segmentation from the homomorphic envelope.
//!
//! The segmenter is deterministic: it smooths the log magnitude with a
//! 15 Hz low-pass to get the envelope, estimates the heart period from the
//! envelope autocorrelation peak in the physiological 0.375-1.5 s lag
//! band, picks envelope peaks greedily with a minimum separation of 0.7
//! periods, and labels first heart sounds by the rule that the systolic
//! gap (S1 to S2) is the shorter of the two alternating gaps. Cycle
//! boundaries run from each S1 onset to the next.

use crate::fft::analytic_magnitude;
use crate::preprocess::filter::lowpass_zero_phase;
use crate::preprocess::{PreprocessError, CYCLE_LEN, MIN_CYCLE_LEN};
use crate::scalar::Scalar;

/// Paired cycle boundaries: `starts[i] < ends[i] <= starts[i + 1]`, each
/// span within `[MIN_CYCLE_LEN, CYCLE_LEN]` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleBoundaries {
    pub starts: Vec<usize>,
    pub ends: Vec<usize>,
}

const ENVELOPE_CUTOFF_HZ: f64 = 15.0;
const MIN_PERIOD_S: f64 = 0.375;
const MAX_PERIOD_S: f64 = 1.5;
const PEAK_FLOOR_FRACTION: f64 = 0.1;
const MIN_SEPARATION_PERIODS: f64 = 0.7;
const AUTOCORR_FLOOR: f64 = 0.1;

pub fn segment_cycles<T: Scalar>(samples: &[T], sample_rate: u32) -> Result<CycleBoundaries, PreprocessError> {
    let needed = 2 * sample_rate as usize;
    if samples.len() < needed {
        return Err(PreprocessError::SignalTooShort {
            len: samples.len(),
            needed,
        });
    }

    let envelope = homomorphic_envelope(samples, sample_rate)?;
    let period = estimate_period(&envelope, sample_rate).ok_or(PreprocessError::NoCyclesFound)?;

    let env_max = envelope.iter().cloned().fold(f64::MIN, f64::max);
    let floor = PEAK_FLOOR_FRACTION * env_max;
    let candidates = local_maxima_above(&envelope, floor);
    if candidates.is_empty() {
        return Err(PreprocessError::NoCyclesFound);
    }

    let min_sep = (MIN_SEPARATION_PERIODS * period as f64).round() as usize;
    let peaks = greedy_pick(&envelope, &candidates, min_sep);
    let s1_peaks = label_s1(&peaks);
    if s1_peaks.len() < 2 {
        return Err(PreprocessError::NoCyclesFound);
    }

    let mut starts = Vec::new();
    let mut ends = Vec::new();
    for window in s1_peaks.windows(2) {
        push_cycle(&mut starts, &mut ends, window[0], window[1]);
    }
    // Tail cycle from the last S1 to the end of the signal.
    push_cycle(&mut starts, &mut ends, *s1_peaks.last().unwrap(), samples.len());

    if starts.is_empty() {
        return Err(PreprocessError::NoCyclesFound);
    }
    Ok(CycleBoundaries { starts, ends })
}

fn push_cycle(starts: &mut Vec<usize>, ends: &mut Vec<usize>, start: usize, limit: usize) {
    let end = limit.min(start + CYCLE_LEN);
    if end - start >= MIN_CYCLE_LEN {
        starts.push(start);
        ends.push(end);
    }
}

/// Low-passed log magnitude of the analytic signal, exponentiated back to
/// amplitude scale. The analytic magnitude (rather than `|x|`) keeps the
/// log free of the deep dips that raw zero crossings would punch into it.
fn homomorphic_envelope<T: Scalar>(samples: &[T], sample_rate: u32) -> Result<Vec<f64>, PreprocessError> {
    let x: Vec<f64> = samples.iter().map(|&v| v.to_f64()).collect();
    let magnitude = analytic_magnitude(&x);
    let log_mag: Vec<f64> = magnitude.iter().map(|&m| (m + 1e-8).ln()).collect();
    let smoothed = lowpass_zero_phase(&log_mag, ENVELOPE_CUTOFF_HZ, 2, sample_rate)?;
    Ok(smoothed.into_iter().map(f64::exp).collect())
}

/// Autocorrelation peak of the mean-removed envelope inside the
/// physiological lag band. Returns `None` when the envelope is flat, the
/// best lag is not a local maximum, or its normalized height is below
/// [`AUTOCORR_FLOOR`] — all signs that there is no periodicity to trust.
fn estimate_period(envelope: &[f64], sample_rate: u32) -> Option<usize> {
    let n = envelope.len();
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = envelope.iter().map(|v| v - mean).collect();
    let r0: f64 = centered.iter().map(|v| v * v).sum();
    if r0 <= 1e-20 {
        return None;
    }

    let min_lag = (MIN_PERIOD_S * sample_rate as f64).round() as usize;
    let max_lag = ((MAX_PERIOD_S * sample_rate as f64).round() as usize).min(n - 1);
    if min_lag == 0 || min_lag > max_lag {
        return None;
    }

    let r_at = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum()
    };

    let mut best_lag = min_lag;
    let mut best_val = f64::MIN;
    for lag in min_lag..=max_lag {
        let v = r_at(lag);
        if v > best_val {
            best_val = v;
            best_lag = lag;
        }
    }
    if best_val / r0 < AUTOCORR_FLOOR {
        return None;
    }
    // A genuine periodicity peak rises above its neighbors; a shoulder of
    // the lag-zero lobe only falls away.
    let left = if best_lag > 0 { r_at(best_lag - 1) } else { f64::MAX };
    let right = if best_lag + 1 < n { r_at(best_lag + 1) } else { f64::MIN };
    if left > best_val && right < best_val {
        return None;
    }
    Some(best_lag)
}

fn local_maxima_above(envelope: &[f64], floor: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    for i in 1..envelope.len().saturating_sub(1) {
        if envelope[i] >= floor && envelope[i] > envelope[i - 1] && envelope[i] >= envelope[i + 1] {
            peaks.push(i);
        }
    }
    peaks
}

/// Accepts candidates tallest-first, refusing any within `min_sep` of an
/// already accepted peak; returns the kept peaks in time order.
fn greedy_pick(envelope: &[f64], candidates: &[usize], min_sep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = candidates.to_vec();
    order.sort_by(|&a, &b| envelope[b].partial_cmp(&envelope[a]).unwrap().then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for &idx in &order {
        if accepted.iter().all(|&p| idx.abs_diff(p) >= min_sep) {
            accepted.push(idx);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Keeps only S1 peaks. When the inter-peak gaps alternate (one parity
/// clearly shorter), the peak opening each short gap is the S1; otherwise
/// every picked peak already is an S1.
fn label_s1(peaks: &[usize]) -> Vec<usize> {
    if peaks.len() < 3 {
        return peaks.to_vec();
    }
    let gaps: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let (even, odd): (Vec<_>, Vec<_>) = gaps.iter().enumerate().partition(|(i, _)| i % 2 == 0);
    let mean = |v: &[(usize, &f64)]| v.iter().map(|(_, &g)| g).sum::<f64>() / v.len().max(1) as f64;
    let (mean_even, mean_odd) = (mean(&even), mean(&odd));
    if odd.is_empty() || mean_even.min(mean_odd) >= 0.8 * mean_even.max(mean_odd) {
        // Gaps look uniform: one peak per cycle.
        return peaks.to_vec();
    }
    // Alternating pattern: the shorter gap is systole, so S1s sit at the
    // parity whose following gap is the short one.
    let first_s1 = if mean_even < mean_odd { 0 } else { 1 };
    peaks.iter().skip(first_s1).step_by(2).copied().collect()
}
