//! Deterministic synthetic data: speckle references and smooth phantoms.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, with normal deviates drawn through
//! `rand_distr::StandardNormal`. Both are portable, so a seed reproduces the
//! same field on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MistError, Result};
use crate::field::ScalarField;
use crate::spectral::{fft_frequencies, Fft2};

/// Parameters of a synthetic speckle reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Meters per pixel.
    pub pitch: f64,
    /// Standard deviation of the Gaussian smoothing kernel, in meters.
    pub correlation_length: f64,
    pub mean_intensity: f64,
    /// Target standard deviation over mean, in `[0, 1)`.
    pub contrast: f64,
}

impl SpeckleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(MistError::invalid("speckle field must be non-empty"));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(MistError::invalid(format!("invalid pitch {}", self.pitch)));
        }
        if !(self.correlation_length.is_finite() && self.correlation_length >= 2.0 * self.pitch) {
            return Err(MistError::invalid(format!(
                "correlation length {} m is below two pixels ({} m)",
                self.correlation_length,
                2.0 * self.pitch
            )));
        }
        if !(self.mean_intensity.is_finite() && self.mean_intensity > 0.0) {
            return Err(MistError::invalid(format!(
                "mean intensity must be positive, got {}",
                self.mean_intensity
            )));
        }
        if !(0.0..1.0).contains(&self.contrast) {
            return Err(MistError::invalid(format!(
                "contrast must lie in [0, 1), got {}",
                self.contrast
            )));
        }
        Ok(())
    }
}

/// Standard normal white noise, `n` samples.
pub(crate) fn white_noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Correlated speckle: white noise smoothed by a Gaussian kernel in Fourier
/// space (periodic wrap), standardised, then mapped to
/// `mean · (1 + contrast · z)`. The sample mean and contrast therefore equal
/// the requested values up to rounding.
pub fn generate_speckle(spec: &SpeckleSpec) -> Result<ScalarField> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    if spec.contrast == 0.0 {
        return ScalarField::filled(w, h, spec.pitch, spec.mean_intensity);
    }

    let fft = Fft2::new(w, h);
    let mut spectrum = fft.forward(&white_noise(spec.seed, w * h));
    let kx = fft_frequencies(w, spec.pitch);
    let ky = fft_frequencies(h, spec.pitch);
    let l2 = spec.correlation_length * spec.correlation_length;
    for (y, ky) in ky.iter().enumerate() {
        for (x, kx) in kx.iter().enumerate() {
            spectrum[y * w + x] *= (-0.5 * (kx * kx + ky * ky) * l2).exp();
        }
    }
    let smooth = fft.inverse_real(spectrum);

    let n = smooth.len() as f64;
    let mean = smooth.iter().sum::<f64>() / n;
    let std = (smooth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(MistError::invalid("speckle field has no variance"));
    }
    let values: Vec<f64> = smooth
        .iter()
        .map(|v| spec.mean_intensity * (1.0 + spec.contrast * (v - mean) / std))
        .collect();
    if let Some(min) = values.iter().copied().reduce(f64::min) {
        if min <= 0.0 {
            return Err(MistError::invalid(format!(
                "contrast {} drives intensity to {min}; lower the contrast",
                spec.contrast
            )));
        }
    }
    ScalarField::new(w, h, spec.pitch, values)
}

/// Isotropic Gaussian `amplitude · exp(-r²/2σ²)` centred at `center` (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBlob {
    pub amplitude: f64,
    pub sigma: f64,
    pub center: (f64, f64),
}

impl GaussianBlob {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let r2 = (x - self.center.0).powi(2) + (y - self.center.1).powi(2);
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Analytic Laplacian `(r²/σ⁴ − 2/σ²) · value`.
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let r2 = (x - self.center.0).powi(2) + (y - self.center.1).powi(2);
        let s2 = self.sigma * self.sigma;
        (r2 / (s2 * s2) - 2.0 / s2) * self.value(x, y)
    }

    pub fn sample(&self, width: usize, height: usize, pitch: f64) -> Result<ScalarField> {
        ScalarField::from_fn(width, height, pitch, |x, y| self.value(x, y))
    }

    pub fn sample_laplacian(&self, width: usize, height: usize, pitch: f64) -> Result<ScalarField> {
        ScalarField::from_fn(width, height, pitch, |x, y| self.laplacian(x, y))
    }
}

/// Centre of a `width × height` grid in meters.
pub fn grid_center(width: usize, height: usize, pitch: f64) -> (f64, f64) {
    (
        (width / 2) as f64 * pitch,
        (height / 2) as f64 * pitch,
    )
}

/// Pure-phase test object: a Gaussian bump in radians. `sigma` must be at
/// least four pixels.
pub fn gaussian_phase_phantom(
    width: usize,
    height: usize,
    pitch: f64,
    amplitude: f64,
    sigma: f64,
    center: (f64, f64),
) -> Result<ScalarField> {
    if !(sigma.is_finite() && sigma >= 4.0 * pitch) {
        return Err(MistError::invalid(format!(
            "phase phantom sigma {sigma} m is below four pixels"
        )));
    }
    GaussianBlob {
        amplitude,
        sigma,
        center,
    }
    .sample(width, height, pitch)
}

/// Slowly varying, non-negative diffusion map (meters). `sigma` must be at
/// least eight pixels.
pub fn smooth_diffusion_phantom(
    width: usize,
    height: usize,
    pitch: f64,
    peak: f64,
    sigma: f64,
    center: (f64, f64),
) -> Result<ScalarField> {
    if !(peak.is_finite() && peak >= 0.0) {
        return Err(MistError::invalid(format!(
            "diffusion peak must be non-negative, got {peak}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 8.0 * pitch) {
        return Err(MistError::invalid(format!(
            "diffusion phantom sigma {sigma} m is below eight pixels"
        )));
    }
    GaussianBlob {
        amplitude: peak,
        sigma,
        center,
    }
    .sample(width, height, pitch)
}
