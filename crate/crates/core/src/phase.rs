//! Phase recovery from its Laplacian by a periodic spectral Poisson solve.
//!
//! `φ = −F⁻¹[ F[∇²φ] / (k_x² + k_y²) ]` with the zero-frequency coefficient set
//! to zero, so the result has zero mean (the additive constant of the phase
//! is undetermined). The frequency grid is the one used by the spectral
//! derivative operators, which makes this an exact inverse of
//! [`spectral_laplacian`] on band-limited fields.
//!
//! Measured data is not periodic. Set [`PoissonOptions::even_extension`] to
//! solve on the mirror-extended 2W × 2H domain instead, which behaves like a
//! Neumann boundary and avoids wrap-around artefacts.

use num_complex::Complex64;

use crate::diffops::{self, StencilScheme};
use crate::error::Result;
use crate::field::ScalarField;
use crate::spectral::{angular_frequencies, Fft2};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoissonOptions {
    /// Solve on the even (mirror) extension of the input.
    pub even_extension: bool,
}

/// Spectral Laplacian; the exact right inverse of [`integrate_phase`].
pub fn spectral_laplacian(f: &ScalarField) -> Result<ScalarField> {
    diffops::laplacian(f, StencilScheme::SPECTRAL)
}

/// Integrates a phase Laplacian (rad·m⁻²) into a zero-mean phase map (rad).
pub fn integrate_phase(lap_phi: &ScalarField, opts: &PoissonOptions) -> Result<ScalarField> {
    let (w, h) = (lap_phi.width(), lap_phi.height());
    let phi = if opts.even_extension {
        let ext = even_extension(lap_phi);
        let solved = periodic_poisson(ext.values(), 2 * w, 2 * h, lap_phi.pitch());
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            out.extend_from_slice(&solved[y * 2 * w..y * 2 * w + w]);
        }
        out
    } else {
        periodic_poisson(lap_phi.values(), w, h, lap_phi.pitch())
    };
    let mean = phi.iter().sum::<f64>() / phi.len() as f64;
    let values = phi.into_iter().map(|v| v - mean).collect();
    ScalarField::new(w, h, lap_phi.pitch(), values)
}

fn periodic_poisson(values: &[f64], w: usize, h: usize, pitch: f64) -> Vec<f64> {
    let fft = Fft2::new(w, h);
    let mut spec = fft.forward(values);
    let kx = angular_frequencies(w, pitch);
    let ky = angular_frequencies(h, pitch);
    for (y, ky) in ky.iter().enumerate() {
        for (x, kx) in kx.iter().enumerate() {
            let k2 = kx * kx + ky * ky;
            let c = &mut spec[y * w + x];
            // Also drops the Nyquist lines, which the derivative grid zeroes.
            *c = if k2 > 0.0 { -*c / k2 } else { Complex64::new(0.0, 0.0) };
        }
    }
    fft.inverse_real(spec)
}

/// Mirror `f` into a 2W × 2H field that is even about both edges.
fn even_extension(f: &ScalarField) -> ScalarField {
    let (w, h) = (f.width(), f.height());
    let mut out = Vec::with_capacity(4 * w * h);
    for yy in 0..2 * h {
        let y = if yy < h { yy } else { 2 * h - 1 - yy };
        for xx in 0..2 * w {
            let x = if xx < w { xx } else { 2 * w - 1 - xx };
            out.push(f.get(x, y));
        }
    }
    ScalarField::from_parts(2 * w, 2 * h, f.pitch(), out)
}
