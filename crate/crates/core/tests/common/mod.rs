#![allow(dead_code)]

use mist_core::synth::{gaussian_phase_phantom, grid_center, smooth_diffusion_phantom};
use mist_core::*;

pub const PITCH: f64 = 5.8e-6;
pub const D0: f64 = 2e-11;

pub fn geometry() -> Geometry {
    Geometry::new(1.0, 17_000.0, PITCH).unwrap()
}

pub fn speckle(size: usize, seed: u64, corr_px: f64) -> ScalarField {
    generate_speckle(&SpeckleSpec {
        seed,
        width: size,
        height: size,
        pitch: PITCH,
        correlation_length: corr_px * PITCH,
        mean_intensity: 1.0,
        contrast: 0.2,
    })
    .unwrap()
}

pub fn phase(size: usize, sigma_px: f64) -> ScalarField {
    gaussian_phase_phantom(size, size, PITCH, 2.0, sigma_px * PITCH, grid_center(size, size, PITCH))
        .unwrap()
}

pub fn diffusion(size: usize, peak: f64, sigma_px: f64) -> ScalarField {
    smooth_diffusion_phantom(size, size, PITCH, peak, sigma_px * PITCH, grid_center(size, size, PITCH))
        .unwrap()
}

/// Pairs from `forward_simplified` or `forward_full`, references seeded
/// `seed0, seed0 + 1, ...`; noise (if any) is added to both images.
pub fn scalar_pairs(
    size: usize,
    count: usize,
    seed0: u64,
    mode: ForwardMode,
    phi: &ScalarField,
    d: &ScalarField,
    noise: f64,
) -> Vec<SpecklePair> {
    let g = geometry();
    (0..count as u64)
        .map(|i| {
            let r = speckle(size, seed0 + i, 3.0);
            let s = forward(mode, &r, phi, Diffusion::Scalar(d), &g, StencilScheme::FD_MIRROR).unwrap();
            let (r, s) = if noise > 0.0 {
                (
                    add_noise(&r, seed0 + 1000 + i, noise).unwrap(),
                    add_noise(&s, seed0 + 2000 + i, noise).unwrap(),
                )
            } else {
                (r, s)
            };
            SpecklePair::new(r, s, i.to_string()).unwrap()
        })
        .collect()
}

pub fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}
