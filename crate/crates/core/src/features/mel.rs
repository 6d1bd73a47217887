//! Mel scale mapping and the triangular mel filterbank.

use crate::features::{FeatureError, MfccConfig};
use crate::scalar::Scalar;

/// `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel<T: Scalar>(f: T) -> Result<T, FeatureError> {
    if f < T::zero() {
        return Err(FeatureError::Domain(f.to_f64()));
    }
    let seven_hundred = T::from_f64(700.0);
    Ok(T::from_f64(2595.0) * (T::one() + f / seven_hundred).log10())
}

/// Exact inverse: `700 * (10^(m / 2595) - 1)`.
pub fn mel_to_hz<T: Scalar>(m: T) -> Result<T, FeatureError> {
    if m < T::zero() {
        return Err(FeatureError::Domain(m.to_f64()));
    }
    let ten = T::from_f64(10.0);
    Ok(T::from_f64(700.0) * (ten.powf(m / T::from_f64(2595.0)) - T::one()))
}

/// The `n_mels` filter center frequencies in Hz: points 1..=n_mels of the
/// mel-equally-spaced grid spanning `[f_min, f_max]` with n_mels + 2 knots.
pub fn mel_centers(f_min: f64, f_max: f64, n_mels: usize) -> Result<Vec<f64>, FeatureError> {
    let grid = mel_grid(f_min, f_max, n_mels)?;
    Ok(grid[1..=n_mels].to_vec())
}

/// All `n_mels + 2` knots of the mel grid in Hz.
fn mel_grid(f_min: f64, f_max: f64, n_mels: usize) -> Result<Vec<f64>, FeatureError> {
    let m_lo = hz_to_mel(f_min)?;
    let m_hi = hz_to_mel(f_max)?;
    let step = (m_hi - m_lo) / (n_mels + 1) as f64;
    (0..n_mels + 2)
        .map(|i| mel_to_hz(m_lo + step * i as f64))
        .collect()
}

/// Triangular filters over the one-sided spectrum: `n_mels` rows of
/// `fft_len / 2 + 1` weights. Each triangle rises from one grid knot to
/// the next and falls to the one after; rows are rescaled so the peak
/// sampled weight is exactly 1.
pub fn mel_filterbank<T: Scalar>(config: &MfccConfig, sample_rate: u32) -> Result<Vec<Vec<T>>, FeatureError> {
    config.validate(sample_rate)?;
    let knots = mel_grid(config.f_min, config.f_max, config.n_mels)?;
    let bins = config.fft_len / 2 + 1;
    let bin_hz = sample_rate as f64 / config.fft_len as f64;

    // Adjacent centers collapsing onto one bin means the resolution
    // cannot carry this many filters.
    for pair in knots[1..=config.n_mels].windows(2) {
        if (pair[0] / bin_hz).round() == (pair[1] / bin_hz).round() {
            return Err(FeatureError::Resolution(format!(
                "filter centers {:.2} Hz and {:.2} Hz share an FFT bin ({} bins over {} Hz)",
                pair[0],
                pair[1],
                bins,
                sample_rate as f64 / 2.0
            )));
        }
    }

    let mut rows = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (lo, center, hi) = (knots[m], knots[m + 1], knots[m + 2]);
        let mut row = vec![T::zero(); bins];
        for (k, slot) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            *slot = T::from_f64(w);
        }
        let peak = row.iter().fold(T::zero(), |acc, &v| acc.max(v));
        if peak <= T::zero() {
            return Err(FeatureError::Resolution(format!(
                "filter {m} spans no FFT bin between {lo:.2} and {hi:.2} Hz"
            )));
        }
        for v in &mut row {
            *v = *v / peak;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_anchors() {
        assert_eq!(hz_to_mel(0.0f64).unwrap(), 0.0);
        // Direct evaluation of the formula: 2595 * log10(2).
        assert!((hz_to_mel(700.0f64).unwrap() - 781.1728).abs() < 1e-3);
        // The 1000 Hz ~ 1000 mel anchor.
        assert!((hz_to_mel(1000.0f64).unwrap() - 999.99).abs() < 0.01);
    }

    #[test]
    fn inverse_anchors() {
        assert_eq!(mel_to_hz(0.0f64).unwrap(), 0.0);
        assert!((mel_to_hz(999.99f64).unwrap() - 1000.0).abs() < 0.1);
        let f = 237.0f64;
        assert!((mel_to_hz(hz_to_mel(f).unwrap()).unwrap() - f).abs() < 1e-6);
    }

    #[test]
    fn negative_inputs_are_domain_errors() {
        assert!(matches!(hz_to_mel(-1.0f64), Err(FeatureError::Domain(_))));
        assert!(matches!(mel_to_hz(-0.5f64), Err(FeatureError::Domain(_))));
    }

    #[test]
    fn centers_are_equally_spaced_in_mel() {
        let centers = mel_centers(0.0, 500.0, 26).unwrap();
        let mels: Vec<f64> = centers.iter().map(|&c| hz_to_mel(c).unwrap()).collect();
        let step = mels[1] - mels[0];
        for pair in mels.windows(2) {
            assert!((pair[1] - pair[0] - step).abs() < 1e-6);
        }
    }

    #[test]
    fn three_filter_centers_match_hand_evaluation() {
        // Grid step is hz_to_mel(500) / 4; centers at 1, 2, 3 steps.
        let delta = hz_to_mel(500.0f64).unwrap() / 4.0;
        let expected: Vec<f64> = (1..=3).map(|i| mel_to_hz(delta * i as f64).unwrap()).collect();
        let centers = mel_centers(0.0, 500.0, 3).unwrap();
        for (c, e) in centers.iter().zip(&expected) {
            assert!((c - e).abs() < 1e-9);
        }
        assert!((expected[0] - 100.9748).abs() < 1e-3);
    }

    #[test]
    fn every_row_peaks_at_exactly_one() {
        let config = MfccConfig::default();
        let rows: Vec<Vec<f64>> = mel_filterbank(&config, 1000).unwrap();
        assert_eq!(rows.len(), config.n_mels);
        for row in &rows {
            assert_eq!(row.len(), config.fft_len / 2 + 1);
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(max, 1.0);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn too_many_filters_for_the_resolution_is_an_error() {
        let config = MfccConfig {
            n_mels: 120,
            n_coeffs: 13,
            ..MfccConfig::default()
        };
        assert!(matches!(
            mel_filterbank::<f64>(&config, 1000),
            Err(FeatureError::Resolution(_))
        ));
    }
}
