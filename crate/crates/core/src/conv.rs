//! Linear convolution and correlation kernels, direct and FFT-based.
//!
//! Shared by the prior computation, the gradient, the dataset generator and
//! the count-axis updates of the tree engine.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Full linear convolution, `out[m] = Σ_j a[m - j] b[j]`, length `|a| + |b| - 1`.
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    // Inner loop over the longer operand so it vectorizes.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in short.iter().enumerate() {
        for (o, &y) in out[i..i + long.len()].iter_mut().zip(long) {
            *o += x * y;
        }
    }
    out
}

/// Correlation at non-negative lags: `out[k] = Σ_s x[s] a[s + k]` for `k < lags`.
pub fn correlate_direct(x: &[f64], a: &[f64], lags: usize) -> Vec<f64> {
    (0..lags)
        .map(|k| {
            if k >= a.len() {
                return 0.0;
            }
            x.iter().zip(&a[k..]).map(|(p, q)| p * q).sum()
        })
        .collect()
}

/// FFT helper that caches plans across calls.
pub struct FftConvolver {
    planner: FftPlanner<f64>,
}

impl Default for FftConvolver {
    fn default() -> Self {
        Self::new()
    }
}

impl FftConvolver {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    /// Smallest power of two holding a linear convolution of the given lengths.
    pub fn size_for(len_a: usize, len_b: usize) -> usize {
        (len_a + len_b - 1).next_power_of_two()
    }

    /// Forward transform of `data` zero-padded to `n`.
    pub fn spectrum(&mut self, data: &[f64], n: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(n, Complex64::new(0.0, 0.0));
        self.planner.plan_fft_forward(n).process(&mut buf);
        buf
    }

    /// Inverse transform (with the `1/n` factor), returning the real part.
    pub fn inverse_real(&mut self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let n = spec.len();
        self.planner.plan_fft_inverse(n).process(&mut spec);
        let scale = 1.0 / n as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    pub fn convolve(&mut self, a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let n = Self::size_for(a.len(), b.len());
        let fa = self.spectrum(a, n);
        let fb = self.spectrum(b, n);
        let prod = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        let mut out = self.inverse_real(prod);
        out.truncate(a.len() + b.len() - 1);
        out
    }

    /// FFT version of [`correlate_direct`].
    pub fn correlate(&mut self, x: &[f64], a: &[f64], lags: usize) -> Vec<f64> {
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let full = self.convolve(&rev, a);
        let base = x.len() - 1;
        (0..lags)
            .map(|k| full.get(base + k).copied().unwrap_or(0.0))
            .collect()
    }
}
