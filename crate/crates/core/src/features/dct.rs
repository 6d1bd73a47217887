//! Orthonormal DCT-II.

use crate::scalar::Scalar;

/// Row-major `(rows, cols)` slice of the orthonormal DCT-II matrix:
/// `C[i][j] = s_i * cos(pi * (2j + 1) * i / (2 * cols))` with
/// `s_0 = sqrt(1/cols)` and `s_i = sqrt(2/cols)` otherwise.
pub fn dct2_matrix<T: Scalar>(rows: usize, cols: usize) -> Vec<Vec<T>> {
    (0..rows)
        .map(|i| {
            let scale = if i == 0 {
                (1.0 / cols as f64).sqrt()
            } else {
                (2.0 / cols as f64).sqrt()
            };
            (0..cols)
                .map(|j| {
                    let angle = std::f64::consts::PI * (2 * j + 1) as f64 * i as f64 / (2.0 * cols as f64);
                    T::from_f64(scale * angle.cos())
                })
                .collect()
        })
        .collect()
}

pub fn apply_rows<T: Scalar>(matrix: &[Vec<T>], input: &[T]) -> Vec<T> {
    matrix
        .iter()
        .map(|row| row.iter().zip(input).map(|(&c, &v)| c * v).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let n = 26;
        let c: Vec<Vec<f64>> = dct2_matrix(n, n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| c[i][k] * c[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9, "rows {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn transform_round_trips_through_the_transpose() {
        let n = 26;
        let c: Vec<Vec<f64>> = dct2_matrix(n, n);
        let v: Vec<f64> = (0..n).map(|i| ((i * 31 % 17) as f64 - 8.0) / 5.0).collect();
        let coeffs = apply_rows(&c, &v);
        // Transpose application.
        let back: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| c[i][j] * coeffs[i]).sum())
            .collect();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_input_loads_only_the_dc_coefficient() {
        let c: Vec<Vec<f64>> = dct2_matrix(5, 5);
        let coeffs = apply_rows(&c, &[2.0; 5]);
        assert!((coeffs[0] - 2.0 * 5f64.sqrt()).abs() < 1e-12);
        for &higher in &coeffs[1..] {
            assert!(higher.abs() < 1e-12);
        }
    }
}
