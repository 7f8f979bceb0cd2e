//! Radix-2 complex FFT on square power-of-two grids.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Precomputed plan for length-`n` transforms.
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// Unnormalized transform; `inverse` flips the exponent sign.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// In-place 2-D transform of a row-major `n x n` array. The inverse
    /// includes the `1/n^2` normalization.
    pub fn transform_2d(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        for row in data.chunks_exact_mut(n) {
            self.transform(row, inverse);
        }
        let mut column = alloc::vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[j * n + i];
            }
            self.transform(&mut column, inverse);
            for j in 0..n {
                data[j * n + i] = column[j];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            for c in data.iter_mut() {
                *c *= scale;
            }
        }
    }
}

/// Signed frequency index in `[-n/2, n/2)` for DFT bin `m`.
#[inline]
pub fn signed_frequency(m: usize, n: usize) -> f64 {
    if m < n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                    let a = sign * 2.0 * PI * (k * t) as f64 / n as f64;
                    acc + v * Complex64::new(libm::cos(a), libm::sin(a))
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 8, 64] {
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(libm::sin(i as f64 * 1.3), libm::cos(i as f64 * 0.7) - 0.2)).collect();
            for &inv in &[false, true] {
                let mut y = x.clone();
                Fft::new(n).transform(&mut y, inv);
                let z = naive_dft(&x, inv);
                for (a, b) in y.iter().zip(&z) {
                    assert!((a - b).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn round_trip_2d() {
        let n = 16;
        let x: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64 * 0.1, 0.0)).collect();
        let mut y = x.clone();
        let fft = Fft::new(n);
        fft.transform_2d(&mut y, false);
        fft.transform_2d(&mut y, true);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut delta = vec![Complex64::new(0.0, 0.0); n * n];
        delta[0] = Complex64::new(1.0, 0.0);
        fft.transform_2d(&mut delta, false);
        assert!(delta.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_frequency(0, 8), 0.0);
        assert_eq!(signed_frequency(3, 8), 3.0);
        assert_eq!(signed_frequency(4, 8), -4.0);
        assert_eq!(signed_frequency(7, 8), -1.0);
    }
}
