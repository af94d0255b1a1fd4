//! Forward Fokker–Planck model of speckle deformation.
//!
//! Given a reference speckle image `I_R`, a phase map `φ` and a diffusion
//! map, predict the sample image
//!
//! ```text
//! I_S = I_R − (Δ/k)·∇·(I_R ∇φ) + Δ·∇²(D_eff·I_R)
//! ```
//!
//! Three variants are provided, each with its own code path:
//!
//! * [`forward_full`] keeps every term, expanding
//!   `∇·(I_R∇φ) = I_R∇²φ + ∇I_R·∇φ` and
//!   `∇²(D I_R) = D∇²I_R + I_R∇²D + 2∇D·∇I_R`.
//! * [`forward_simplified`] drops the speckle-transport term `∇I_R·∇φ` and the
//!   derivatives of `D_eff`: `I_S = I_R − (Δ/k) I_R ∇²φ + Δ D_eff ∇²I_R`.
//!   This is exactly the model the solvers invert.
//! * [`forward_tensor`] replaces `D_eff` by a symmetric tensor and the
//!   diffusion term by `∂²ₓ(D_xx I_R) + ∂²_y(D_yy I_R) + ∂²ₓ_y(D_xy I_R)`.
//!   The cross term is a single mixed derivative with no factor of two; the
//!   tensor solver uses the same convention.
//!
//! Intensities are never clipped. Use [`non_positive_pixels`] to check that a
//! simulated image stayed physical.

use crate::diffops::{self, StencilScheme};
use crate::error::{MistError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;
use crate::synth::white_noise;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForwardMode {
    Full,
    Simplified,
    Tensor,
}

impl ForwardMode {
    pub fn name(&self) -> &'static str {
        match self {
            ForwardMode::Full => "full",
            ForwardMode::Simplified => "simplified",
            ForwardMode::Tensor => "tensor",
        }
    }
}

impl std::str::FromStr for ForwardMode {
    type Err = MistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ForwardMode::Full),
            "simplified" => Ok(ForwardMode::Simplified),
            "tensor" => Ok(ForwardMode::Tensor),
            other => Err(MistError::invalid(format!("unknown forward mode {other:?}"))),
        }
    }
}

/// Diffusion description matching a [`ForwardMode`].
#[derive(Debug, Clone, Copy)]
pub enum Diffusion<'a> {
    Scalar(&'a ScalarField),
    Tensor {
        xx: &'a ScalarField,
        yy: &'a ScalarField,
        xy: &'a ScalarField,
    },
}

/// Dispatches to the forward model selected by `mode`.
pub fn forward(
    mode: ForwardMode,
    i_r: &ScalarField,
    phi: &ScalarField,
    diffusion: Diffusion<'_>,
    geometry: &Geometry,
    scheme: StencilScheme,
) -> Result<ScalarField> {
    match (mode, diffusion) {
        (ForwardMode::Full, Diffusion::Scalar(d)) => forward_full(i_r, phi, d, geometry, scheme),
        (ForwardMode::Simplified, Diffusion::Scalar(d)) => {
            forward_simplified(i_r, phi, d, geometry, scheme)
        }
        (ForwardMode::Tensor, Diffusion::Tensor { xx, yy, xy }) => {
            forward_tensor(i_r, phi, xx, yy, xy, geometry, scheme)
        }
        (ForwardMode::Tensor, Diffusion::Scalar(_)) => Err(MistError::invalid(
            "tensor mode needs three diffusion fields (xx, yy, xy)",
        )),
        (_, Diffusion::Tensor { .. }) => Err(MistError::invalid(
            "full and simplified modes take a single scalar diffusion field",
        )),
    }
}

fn check_inputs(i_r: &ScalarField, others: &[&ScalarField], geometry: &Geometry) -> Result<()> {
    for f in others {
        i_r.ensure_same_shape(f, "forward model input")?;
    }
    if ((i_r.pitch() - geometry.pitch()) / geometry.pitch()).abs() > 1e-9 {
        return Err(MistError::DimensionMismatch(format!(
            "field pitch {} m differs from geometry pitch {} m",
            i_r.pitch(),
            geometry.pitch()
        )));
    }
    if let Some(i) = i_r.values().iter().position(|&v| v <= 0.0) {
        return Err(MistError::invalid(format!(
            "reference intensity must be positive, pixel {} is {}",
            i,
            i_r.values()[i]
        )));
    }
    Ok(())
}

/// Full model with no dropped terms.
pub fn forward_full(
    i_r: &ScalarField,
    phi: &ScalarField,
    d_eff: &ScalarField,
    geometry: &Geometry,
    scheme: StencilScheme,
) -> Result<ScalarField> {
    check_inputs(i_r, &[phi, d_eff], geometry)?;
    let (irx, iry) = diffops::gradient(i_r, scheme)?;
    let lap_ir = diffops::laplacian(i_r, scheme)?;
    let (px, py) = diffops::gradient(phi, scheme)?;
    let lap_phi = diffops::laplacian(phi, scheme)?;
    let (dx, dy) = diffops::gradient(d_eff, scheme)?;
    let lap_d = diffops::laplacian(d_eff, scheme)?;

    let lens = geometry.lensing_coefficient();
    let delta = geometry.delta();
    let out = (0..i_r.len())
        .map(|n| {
            let ir = i_r.values()[n];
            let flow = ir * lap_phi.values()[n]
                + irx.values()[n] * px.values()[n]
                + iry.values()[n] * py.values()[n];
            let diffusion = d_eff.values()[n] * lap_ir.values()[n]
                + ir * lap_d.values()[n]
                + 2.0 * (dx.values()[n] * irx.values()[n] + dy.values()[n] * iry.values()[n]);
            ir - lens * flow + delta * diffusion
        })
        .collect();
    Ok(ScalarField::from_parts(i_r.width(), i_r.height(), i_r.pitch(), out))
}

/// Model with slowly varying `D_eff` and negligible speckle transport; the
/// inversion model.
pub fn forward_simplified(
    i_r: &ScalarField,
    phi: &ScalarField,
    d_eff: &ScalarField,
    geometry: &Geometry,
    scheme: StencilScheme,
) -> Result<ScalarField> {
    check_inputs(i_r, &[phi, d_eff], geometry)?;
    let lap_ir = diffops::laplacian(i_r, scheme)?;
    let lap_phi = diffops::laplacian(phi, scheme)?;
    let lens = geometry.lensing_coefficient();
    let delta = geometry.delta();
    let out = i_r
        .values()
        .iter()
        .zip(lap_phi.values())
        .zip(d_eff.values().iter().zip(lap_ir.values()))
        .map(|((&ir, &lp), (&d, &li))| ir - lens * ir * lp + delta * d * li)
        .collect();
    Ok(ScalarField::from_parts(i_r.width(), i_r.height(), i_r.pitch(), out))
}

/// Directional dark-field model with a symmetric diffusion tensor.
pub fn forward_tensor(
    i_r: &ScalarField,
    phi: &ScalarField,
    d_xx: &ScalarField,
    d_yy: &ScalarField,
    d_xy: &ScalarField,
    geometry: &Geometry,
    scheme: StencilScheme,
) -> Result<ScalarField> {
    check_inputs(i_r, &[phi, d_xx, d_yy, d_xy], geometry)?;
    let (irx, iry) = diffops::gradient(i_r, scheme)?;
    let ir_xx = diffops::second_derivative_x(i_r, scheme)?;
    let ir_yy = diffops::second_derivative_y(i_r, scheme)?;
    let ir_xy = diffops::mixed_derivative(i_r, scheme)?;
    let (px, py) = diffops::gradient(phi, scheme)?;
    let lap_phi = diffops::laplacian(phi, scheme)?;

    // ∂²ₓ(D I) = D I_xx + I D_xx + 2 D_x I_x, and likewise for y.
    let (axx, _) = diffops::gradient(d_xx, scheme)?;
    let dxx_xx = diffops::second_derivative_x(d_xx, scheme)?;
    let (_, byy) = diffops::gradient(d_yy, scheme)?;
    let dyy_yy = diffops::second_derivative_y(d_yy, scheme)?;
    // ∂ₓ∂_y(D I) = D I_xy + I D_xy + D_x I_y + D_y I_x.
    let (cx, cy) = diffops::gradient(d_xy, scheme)?;
    let dxy_xy = diffops::mixed_derivative(d_xy, scheme)?;

    let lens = geometry.lensing_coefficient();
    let delta = geometry.delta();
    let out = (0..i_r.len())
        .map(|n| {
            let ir = i_r.values()[n];
            let (gx, gy) = (irx.values()[n], iry.values()[n]);
            let flow = ir * lap_phi.values()[n] + gx * px.values()[n] + gy * py.values()[n];
            let xx = d_xx.values()[n] * ir_xx.values()[n]
                + ir * dxx_xx.values()[n]
                + 2.0 * axx.values()[n] * gx;
            let yy = d_yy.values()[n] * ir_yy.values()[n]
                + ir * dyy_yy.values()[n]
                + 2.0 * byy.values()[n] * gy;
            let xy = d_xy.values()[n] * ir_xy.values()[n]
                + ir * dxy_xy.values()[n]
                + cx.values()[n] * gy
                + cy.values()[n] * gx;
            ir - lens * flow + delta * (xx + yy + xy)
        })
        .collect();
    Ok(ScalarField::from_parts(i_r.width(), i_r.height(), i_r.pitch(), out))
}

/// Adds zero-mean Gaussian noise with standard deviation
/// `relative_sigma · mean(field)`. Deterministic per seed.
pub fn add_noise(field: &ScalarField, seed: u64, relative_sigma: f64) -> Result<ScalarField> {
    if !(relative_sigma.is_finite() && relative_sigma >= 0.0) {
        return Err(MistError::invalid(format!(
            "noise level must be non-negative, got {relative_sigma}"
        )));
    }
    if relative_sigma == 0.0 {
        return Ok(field.clone());
    }
    let sigma = relative_sigma * field.mean();
    let noise = white_noise(seed, field.len());
    let out = field
        .values()
        .iter()
        .zip(noise)
        .map(|(&v, z)| v + sigma * z)
        .collect();
    Ok(ScalarField::from_parts(field.width(), field.height(), field.pitch(), out))
}

/// Number of pixels at or below zero intensity.
pub fn non_positive_pixels(field: &ScalarField) -> usize {
    field.values().iter().filter(|&&v| v <= 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_speckle, grid_center, GaussianBlob, SpeckleSpec};

    const PITCH: f64 = 5.8e-6;

    fn geometry() -> Geometry {
        Geometry::new(1.0, 17_000.0, PITCH).unwrap()
    }

    fn speckle(seed: u64, n: usize) -> ScalarField {
        generate_speckle(&SpeckleSpec {
            seed,
            width: n,
            height: n,
            pitch: PITCH,
            correlation_length: 3.0 * PITCH,
            mean_intensity: 1.0,
            contrast: 0.2,
        })
        .unwrap()
    }

    fn blob(amplitude: f64, sigma_px: f64, n: usize) -> ScalarField {
        GaussianBlob {
            amplitude,
            sigma: sigma_px * PITCH,
            center: grid_center(n, n, PITCH),
        }
        .sample(n, n, PITCH)
        .unwrap()
    }

    fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    #[test]
    fn constant_phase_no_diffusion_is_identity() {
        let n = 32;
        let ir = speckle(1, n);
        let phi = ScalarField::filled(n, n, PITCH, 0.7).unwrap();
        let d = ScalarField::zeros(n, n, PITCH).unwrap();
        let g = geometry();
        for s in [StencilScheme::FD_MIRROR, StencilScheme::FD_PERIODIC] {
            assert_eq!(forward_full(&ir, &phi, &d, &g, s).unwrap(), ir);
            assert_eq!(forward_simplified(&ir, &phi, &d, &g, s).unwrap(), ir);
        }
    }

    #[test]
    fn uniform_diffusion_collapses_product_rule() {
        let n = 32;
        let ir = speckle(2, n);
        let phi = ScalarField::zeros(n, n, PITCH).unwrap();
        let d0 = 2e-11;
        let d = ScalarField::filled(n, n, PITCH, d0).unwrap();
        let g = geometry();
        let s = StencilScheme::FD_MIRROR;
        let out = forward_full(&ir, &phi, &d, &g, s).unwrap();
        let lap = diffops::laplacian(&ir, s).unwrap();
        let expected = ir.zip_map(&lap, |a, l| a + g.delta() * d0 * l);
        assert!(max_abs_diff(&out, &expected) < 1e-14);
    }

    #[test]
    fn uniform_reference_only_sees_lensing() {
        let n = 48;
        let ir = ScalarField::filled(n, n, PITCH, 1.5).unwrap();
        let phi = blob(2.0, 8.0, n);
        let d = blob(1e-11, 10.0, n);
        let g = geometry();
        let s = StencilScheme::FD_MIRROR;
        let out = forward_simplified(&ir, &phi, &d, &g, s).unwrap();
        let lap = diffops::laplacian(&phi, s).unwrap();
        let expected = lap.map(|l| 1.5 * (1.0 - g.lensing_coefficient() * l));
        assert!(max_abs_diff(&out, &expected) < 1e-14);
    }

    #[test]
    fn mode_dispatch_checks_diffusion_kind() {
        let n = 16;
        let ir = speckle(3, n);
        let z = ScalarField::zeros(n, n, PITCH).unwrap();
        let g = geometry();
        let s = StencilScheme::FD_MIRROR;
        assert!(forward(ForwardMode::Tensor, &ir, &z, Diffusion::Scalar(&z), &g, s).is_err());
        let t = Diffusion::Tensor {
            xx: &z,
            yy: &z,
            xy: &z,
        };
        assert!(forward(ForwardMode::Full, &ir, &z, t, &g, s).is_err());
        assert_eq!(forward(ForwardMode::Tensor, &ir, &z, t, &g, s).unwrap(), ir);
        assert_eq!("tensor".parse::<ForwardMode>().unwrap(), ForwardMode::Tensor);
        assert!("fancy".parse::<ForwardMode>().is_err());
    }

    #[test]
    fn rejects_mismatch() {
        let ir = speckle(4, 16);
        let small = ScalarField::zeros(16, 15, PITCH).unwrap();
        let z = ScalarField::zeros(16, 16, PITCH).unwrap();
        let g = geometry();
        assert!(forward_full(&ir, &small, &z, &g, StencilScheme::FD_MIRROR).is_err());
        let g2 = Geometry::new(1.0, 17_000.0, 2.0 * PITCH).unwrap();
        assert!(forward_full(&ir, &z, &z, &g2, StencilScheme::FD_MIRROR).is_err());
    }

    /// The simplified model drops ∇I_R·∇φ and the derivatives of D; the gap
    /// to the full model is reported here, not bounded.
    #[test]
    fn full_and_simplified_differ_by_dropped_terms() {
        let n = 64;
        let ir = speckle(5, n);
        let phi = blob(50.0, 10.0, n);
        let d = blob(2e-11, 12.0, n);
        let g = geometry();
        let s = StencilScheme::FD_MIRROR;
        let full = forward_full(&ir, &phi, &d, &g, s).unwrap();
        let simple = forward_simplified(&ir, &phi, &d, &g, s).unwrap();
        let (irx, iry) = diffops::gradient(&ir, s).unwrap();
        let (px, py) = diffops::gradient(&phi, s).unwrap();
        let (dx, dy) = diffops::gradient(&d, s).unwrap();
        let lap_d = diffops::laplacian(&d, s).unwrap();
        for n in 0..full.len() {
            let transport = irx.values()[n] * px.values()[n] + iry.values()[n] * py.values()[n];
            let dropped = -g.lensing_coefficient() * transport
                + g.delta()
                    * (ir.values()[n] * lap_d.values()[n]
                        + 2.0 * (dx.values()[n] * irx.values()[n] + dy.values()[n] * iry.values()[n]));
            assert!((full.values()[n] - simple.values()[n] - dropped).abs() < 1e-14);
        }
        assert!(max_abs_diff(&full, &simple) > 0.0);
    }

    #[test]
    fn tensor_zero_diffusion_is_phase_only() {
        let n = 40;
        let ir = speckle(6, n);
        let phi = blob(30.0, 8.0, n);
        let z = ScalarField::zeros(n, n, PITCH).unwrap();
        let g = geometry();
        for s in [StencilScheme::FD_MIRROR, StencilScheme::SPECTRAL] {
            let t = forward_tensor(&ir, &phi, &z, &z, &z, &g, s).unwrap();
            let f = forward_full(&ir, &phi, &z, &g, s).unwrap();
            assert!(max_abs_diff(&t, &f) < 1e-14);
        }
    }

    /// With a speckle that varies only along x, only the D_xx term can
    /// contribute; with one that varies only along y, only D_yy.
    #[test]
    fn tensor_anisotropy_follows_grating_orientation() {
        let n = 64;
        let g = geometry();
        let s = StencilScheme::FD_PERIODIC;
        let period = 8.0 * PITCH;
        let k = 2.0 * std::f64::consts::PI / period;
        let grating_x = ScalarField::from_fn(n, n, PITCH, |x, _| 1.0 + 0.3 * (k * x).sin()).unwrap();
        let grating_y = ScalarField::from_fn(n, n, PITCH, |_, y| 1.0 + 0.3 * (k * y).sin()).unwrap();
        let phi = ScalarField::zeros(n, n, PITCH).unwrap();
        let dxx = ScalarField::filled(n, n, PITCH, 2e-11).unwrap();
        let dyy = ScalarField::filled(n, n, PITCH, 1e-11).unwrap();
        let dxy = ScalarField::zeros(n, n, PITCH).unwrap();

        let sx = forward_tensor(&grating_x, &phi, &dxx, &dyy, &dxy, &g, s).unwrap();
        let sy = forward_tensor(&grating_y, &phi, &dxx, &dyy, &dxy, &g, s).unwrap();
        let only_xx = diffops::second_derivative_x(&grating_x, s).unwrap();
        let only_yy = diffops::second_derivative_y(&grating_y, s).unwrap();
        for n in 0..sx.len() {
            let ex = grating_x.values()[n] + g.delta() * 2e-11 * only_xx.values()[n];
            let ey = grating_y.values()[n] + g.delta() * 1e-11 * only_yy.values()[n];
            assert!((sx.values()[n] - ex).abs() < 1e-14);
            assert!((sy.values()[n] - ey).abs() < 1e-14);
        }
        let dx = sx.zip_map(&grating_x, |a, b| a - b);
        let dy = sy.zip_map(&grating_y, |a, b| a - b);
        assert!((dx.rms() / dy.rms() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn noise_statistics() {
        let f = ScalarField::filled(256, 256, PITCH, 4.0).unwrap();
        assert_eq!(add_noise(&f, 1, 0.0).unwrap(), f);
        let a = add_noise(&f, 1, 0.01).unwrap();
        assert_eq!(a, add_noise(&f, 1, 0.01).unwrap());
        let na = a.map(|v| v - 4.0);
        assert!((na.std_dev() / 0.04 - 1.0).abs() < 0.05);
        let nb = add_noise(&f, 2, 0.01).unwrap().map(|v| v - 4.0);
        let corr = na
            .values()
            .iter()
            .zip(nb.values())
            .map(|(x, y)| (x - na.mean()) * (y - nb.mean()))
            .sum::<f64>()
            / (na.len() as f64 * na.std_dev() * nb.std_dev());
        assert!(corr.abs() < 0.05, "{corr}");
        assert!(add_noise(&f, 1, -0.1).is_err());
    }

    #[test]
    fn counts_non_positive() {
        let f = ScalarField::new(2, 2, 1.0, vec![1.0, 0.0, -1.0, 2.0]).unwrap();
        assert_eq!(non_positive_pixels(&f), 2);
    }
}
