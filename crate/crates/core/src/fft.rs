//! Iterative radix-2 FFT and the analytic-signal magnitude built on it.

use crate::scalar::Scalar;

/// In-place radix-2 decimation-in-time FFT. Lengths must be powers of two
/// (zero is allowed and does nothing). The inverse transform includes the
/// `1/n` normalization.
pub fn fft_in_place<T: Scalar>(re: &mut [T], im: &mut [T], inverse: bool) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two() || n == 0, "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (w_re, w_im) = (T::from_f64(angle.cos()), T::from_f64(angle.sin()));
        for start in (0..n).step_by(len) {
            let mut cur_re = T::one();
            let mut cur_im = T::zero();
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = cur_re * re[b] - cur_im * im[b];
                let t_im = cur_re * im[b] + cur_im * re[b];
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = T::from_f64(1.0 / n as f64);
        for v in re.iter_mut() {
            *v *= scale;
        }
        for v in im.iter_mut() {
            *v *= scale;
        }
    }
}

/// Magnitude of the analytic signal (the Hilbert envelope), computed by
/// zeroing negative frequencies in a power-of-two padded spectrum.
pub fn analytic_magnitude<T: Scalar>(signal: &[T]) -> Vec<T> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let padded = n.next_power_of_two();
    let mut re: Vec<T> = signal.to_vec();
    re.resize(padded, T::zero());
    let mut im = vec![T::zero(); padded];
    fft_in_place(&mut re, &mut im, false);

    let two = T::from_f64(2.0);
    // Keep DC and Nyquist, double positive frequencies, drop the rest.
    for k in 1..padded / 2 {
        re[k] *= two;
        im[k] *= two;
    }
    for k in padded / 2 + 1..padded {
        re[k] = T::zero();
        im[k] = T::zero();
    }
    fft_in_place(&mut re, &mut im, true);
    re.iter()
        .zip(&im)
        .take(n)
        .map(|(&a, &b)| (a * a + b * b).sqrt())
        .collect()
}
