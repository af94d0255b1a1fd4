//! Thin 2-D FFT wrapper over `rustfft` plus the angular-frequency grids used
//! by the spectral operators and the Poisson solver.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub(crate) fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        buf
    }

    /// Inverse transform, normalised, keeping the real part.
    pub(crate) fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        spectrum.into_iter().map(|c| c.re * norm).collect()
    }

    fn transform(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        rows.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); w * h];
        for y in 0..h {
            for x in 0..w {
                t[x * h + y] = buf[y * w + x];
            }
        }
        cols.process(&mut t);
        for x in 0..w {
            for y in 0..h {
                buf[y * w + x] = t[x * h + y];
            }
        }
    }
}

/// Angular frequencies `2π m / (n·pitch)` in FFT order.
///
/// The Nyquist bin of an even-length axis is set to zero. Every spectral
/// operator is built from powers of this first-derivative multiplier, so the
/// discrete product rule and summation-by-parts hold exactly and the
/// Laplacian is the divergence of the gradient.
pub(crate) fn angular_frequencies(n: usize, pitch: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * pitch);
    (0..n)
        .map(|m| {
            if n.is_multiple_of(2) && m == n / 2 {
                0.0
            } else if m <= n / 2 {
                m as f64 * scale
            } else {
                (m as f64 - n as f64) * scale
            }
        })
        .collect()
}

/// Plain FFT angular frequencies, Nyquist bin kept at `-π/pitch`.
pub(crate) fn fft_frequencies(n: usize, pitch: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * pitch);
    (0..n)
        .map(|m| {
            if m < n.div_ceil(2) {
                m as f64 * scale
            } else {
                (m as f64 - n as f64) * scale
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_fft_order() {
        let k = angular_frequencies(4, 1.0);
        let s = 2.0 * PI / 4.0;
        assert_eq!(k, vec![0.0, s, 0.0, -s]);
        let k = angular_frequencies(5, 1.0);
        let s = 2.0 * PI / 5.0;
        assert_eq!(k, vec![0.0, s, 2.0 * s, -2.0 * s, -s]);
        assert_eq!(fft_frequencies(5, 1.0), k);
        let s = 2.0 * PI / 4.0;
        assert_eq!(fft_frequencies(4, 1.0), vec![0.0, s, -2.0 * s, -s]);
    }

    #[test]
    fn round_trip() {
        let data: Vec<f64> = (0..48).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let fft = Fft2::new(8, 6);
        let back = fft.inverse_real(fft.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
