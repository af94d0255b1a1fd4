//! Discrete derivatives on [`ScalarField`]s.
//!
//! Two flavours are offered. The finite-difference scheme uses central
//! differences (five-point Laplacian, four-corner mixed derivative) with
//! either mirror or periodic ghost cells, so outputs always have the input's
//! dimensions. Mirror ghosts reflect about the edge sample (`f[-1] = f[1]`).
//! The spectral scheme multiplies by powers of `i·k` in Fourier space and is
//! necessarily periodic.
//!
//! All outputs carry the input's units times m⁻¹ per derivative order.

use num_complex::Complex64;

use crate::error::{MistError, Result};
use crate::field::ScalarField;
use crate::spectral::{angular_frequencies, Fft2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilKind {
    FivePointFd,
    SpectralFourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Mirror,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StencilScheme {
    kind: StencilKind,
    boundary: Boundary,
}

impl StencilScheme {
    /// Finite differences with mirrored edges, the default for measured data.
    pub const FD_MIRROR: StencilScheme = StencilScheme {
        kind: StencilKind::FivePointFd,
        boundary: Boundary::Mirror,
    };
    pub const FD_PERIODIC: StencilScheme = StencilScheme {
        kind: StencilKind::FivePointFd,
        boundary: Boundary::Periodic,
    };
    pub const SPECTRAL: StencilScheme = StencilScheme {
        kind: StencilKind::SpectralFourier,
        boundary: Boundary::Periodic,
    };

    pub fn new(kind: StencilKind, boundary: Boundary) -> Result<Self> {
        if kind == StencilKind::SpectralFourier && boundary != Boundary::Periodic {
            return Err(MistError::invalid(
                "the spectral scheme is only defined with a periodic boundary",
            ));
        }
        Ok(Self { kind, boundary })
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

impl Default for StencilScheme {
    fn default() -> Self {
        Self::FD_MIRROR
    }
}

const MIN_EXTENT: usize = 3;

fn check_support(f: &ScalarField) -> Result<()> {
    if f.width() < MIN_EXTENT || f.height() < MIN_EXTENT {
        return Err(MistError::invalid(format!(
            "{}x{} field is smaller than the 3x3 stencil support",
            f.width(),
            f.height()
        )));
    }
    Ok(())
}

/// Ghost-cell index lookup for one axis.
#[derive(Clone, Copy)]
struct Axis {
    n: usize,
    boundary: Boundary,
}

impl Axis {
    #[inline]
    fn prev(self, i: usize) -> usize {
        match (i, self.boundary) {
            (0, Boundary::Mirror) => 1,
            (0, Boundary::Periodic) => self.n - 1,
            _ => i - 1,
        }
    }

    #[inline]
    fn next(self, i: usize) -> usize {
        if i + 1 < self.n {
            i + 1
        } else {
            match self.boundary {
                Boundary::Mirror => self.n - 2,
                Boundary::Periodic => 0,
            }
        }
    }
}

fn fd_apply<F>(f: &ScalarField, boundary: Boundary, stencil: F) -> ScalarField
where
    F: Fn(&dyn Fn(usize, usize) -> f64, usize, usize, Axis, Axis) -> f64,
{
    let (w, h) = (f.width(), f.height());
    let ax = Axis { n: w, boundary };
    let ay = Axis { n: h, boundary };
    let at = |x: usize, y: usize| f.get(x, y);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(stencil(&at, x, y, ax, ay));
        }
    }
    ScalarField::from_parts(w, h, f.pitch(), out)
}

/// Spectral multiplier applied to the field's transform.
fn spectral_apply<M>(f: &ScalarField, multiplier: M) -> ScalarField
where
    M: Fn(f64, f64) -> Complex64,
{
    let (w, h) = (f.width(), f.height());
    let kx = angular_frequencies(w, f.pitch());
    let ky = angular_frequencies(h, f.pitch());
    let fft = Fft2::new(w, h);
    let mut spec = fft.forward(f.values());
    for (y, &ky) in ky.iter().enumerate() {
        for (x, &kx) in kx.iter().enumerate() {
            spec[y * w + x] *= multiplier(kx, ky);
        }
    }
    ScalarField::from_parts(w, h, f.pitch(), fft.inverse_real(spec))
}

/// `∂f/∂x`.
pub fn derivative_x(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (2.0 * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, ax, _| {
                (at(ax.next(x), y) - at(ax.prev(x), y)) * s
            })
        }
        StencilKind::SpectralFourier => spectral_apply(f, |kx, _| Complex64::new(0.0, kx)),
    })
}

/// `∂f/∂y`.
pub fn derivative_y(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (2.0 * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, _, ay| {
                (at(x, ay.next(y)) - at(x, ay.prev(y))) * s
            })
        }
        StencilKind::SpectralFourier => spectral_apply(f, |_, ky| Complex64::new(0.0, ky)),
    })
}

/// Transverse gradient `(∂f/∂x, ∂f/∂y)`.
pub fn gradient(f: &ScalarField, scheme: StencilScheme) -> Result<(ScalarField, ScalarField)> {
    Ok((derivative_x(f, scheme)?, derivative_y(f, scheme)?))
}

/// `∂²f/∂x²`.
pub fn second_derivative_x(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (f.pitch() * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, ax, _| {
                (at(ax.next(x), y) + at(ax.prev(x), y) - 2.0 * at(x, y)) * s
            })
        }
        StencilKind::SpectralFourier => spectral_apply(f, |kx, _| Complex64::new(-kx * kx, 0.0)),
    })
}

/// `∂²f/∂y²`.
pub fn second_derivative_y(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (f.pitch() * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, _, ay| {
                (at(x, ay.next(y)) + at(x, ay.prev(y)) - 2.0 * at(x, y)) * s
            })
        }
        StencilKind::SpectralFourier => spectral_apply(f, |_, ky| Complex64::new(-ky * ky, 0.0)),
    })
}

/// Transverse Laplacian `∇²f`.
pub fn laplacian(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (f.pitch() * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, ax, ay| {
                (at(ax.next(x), y) + at(ax.prev(x), y) + at(x, ay.next(y)) + at(x, ay.prev(y))
                    - 4.0 * at(x, y))
                    * s
            })
        }
        StencilKind::SpectralFourier => {
            spectral_apply(f, |kx, ky| Complex64::new(-(kx * kx + ky * ky), 0.0))
        }
    })
}

/// Mixed second derivative `∂²f/∂x∂y`.
pub fn mixed_derivative(f: &ScalarField, scheme: StencilScheme) -> Result<ScalarField> {
    check_support(f)?;
    Ok(match scheme.kind {
        StencilKind::FivePointFd => {
            let s = 1.0 / (4.0 * f.pitch() * f.pitch());
            fd_apply(f, scheme.boundary, |at, x, y, ax, ay| {
                let (xp, xm, yp, ym) = (ax.next(x), ax.prev(x), ay.next(y), ay.prev(y));
                (at(xp, yp) - at(xp, ym) - at(xm, yp) + at(xm, ym)) * s
            })
        }
        StencilKind::SpectralFourier => spectral_apply(f, |kx, ky| Complex64::new(-kx * ky, 0.0)),
    })
}

/// Divergence of a vector field given by its components.
pub fn divergence(
    fx: &ScalarField,
    fy: &ScalarField,
    scheme: StencilScheme,
) -> Result<ScalarField> {
    fx.ensure_same_shape(fy, "divergence components")?;
    let dx = derivative_x(fx, scheme)?;
    let dy = derivative_y(fy, scheme)?;
    Ok(dx.zip_map(&dy, |a, b| a + b))
}
