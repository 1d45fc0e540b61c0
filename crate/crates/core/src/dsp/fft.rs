//! Iterative radix-2 FFT for the short power-of-two segments of the STFT.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Result};

/// Precomputed twiddles and bit-reversal table for one transform length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid!("FFT length {} is not a power of two", n));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        let (cos, sin) = (0..n / 2)
            .map(|k| {
                let a = -core::f64::consts::TAU * k as f64 / n as f64;
                (Float::cos(a), Float::sin(a))
            })
            .unzip();
        Ok(Self { n, cos, sin, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform `X_k = Σ x_n e^{−2πikn/N}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let (c, s) = (self.cos[k * step], self.sin[k * step]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * c - im[b] * s;
                    let ti = re[b] * s + im[b] * c;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
    }

    /// Magnitudes of the non-negative frequency bins `0..=N/2` of a real signal.
    pub fn real_magnitude(&self, x: &[f64], out: &mut [f64]) {
        let mut re = x.to_vec();
        let mut im = alloc::vec![0.0; self.n];
        self.forward(&mut re, &mut im);
        for (k, o) in out.iter_mut().enumerate().take(self.n / 2 + 1) {
            *o = Float::sqrt(re[k] * re[k] + im[k] * im[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(r, i), (t, &v)| {
                    let a = -core::f64::consts::TAU * (k * t) as f64 / n as f64;
                    (r + v * a.cos(), i + v * a.sin())
                })
            })
            .unzip()
    }

    #[test]
    fn matches_direct_dft() {
        for n in [1, 2, 8, 128] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let (wr, wi) = naive_dft(&x);
            let fft = Fft::new(n).unwrap();
            let mut re = x.clone();
            let mut im = alloc::vec![0.0; n];
            fft.forward(&mut re, &mut im);
            for k in 0..n {
                assert!((re[k] - wr[k]).abs() < 1e-9 && (im[k] - wi[k]).abs() < 1e-9, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Fft::new(100).is_err());
        assert!(Fft::new(0).is_err());
    }
}
