//! Per-pixel inversion of the simplified speckle model.
//!
//! At every pixel each mask position `i` contributes one linear equation
//!
//! ```text
//! I_Ri − I_Si = (Δ/k)·I_Ri·∇²φ − Δ·D_eff·∇²I_Ri
//! ```
//!
//! in the two unknowns `∇²φ` and `D_eff`. Two positions give a square system
//! with a closed form ([`solve_two_shot`]); more positions are solved in the
//! least-squares sense ([`solve_least_squares`]). The directional variant
//! ([`solve_tensor`]) has four unknowns `∇²φ, D_xx, D_yy, D_xy`.
//!
//! Rank test: a pixel is degenerate when its system volume (the square root
//! of the Gram determinant of the design columns; for two positions this is
//! proportional to `|I_R2∇²I_R1 − I_R1∇²I_R2|`) is at most
//! `denominator_epsilon` times the median over the image, or when the
//! columns are parallel to within [`RANK_FLOOR`] after normalisation.
//! Degenerate pixels take the value of the nearest solved pixel (breadth
//! first over the 4-neighbourhood) and are reported in the result's mask.
//! If every pixel is degenerate the solve fails.
//!
//! Least squares is unweighted, i.e. all equations are assumed to carry the
//! same noise variance.

use rayon::prelude::*;

use crate::diffops::{self, StencilScheme};
use crate::error::{MistError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;
use crate::model::{ReconstructionResult, SpecklePair, TensorResult};
use crate::phase::{integrate_phase, PoissonOptions};

/// Lower bound on the normalised system volume (product of the column-
/// normalised `R` diagonal). Below this the columns are parallel up to
/// rounding and no relative threshold can be trusted.
pub const RANK_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative threshold on the per-pixel system volume, against the
    /// median over the image.
    pub denominator_epsilon: f64,
    /// Only affects exported display copies; stored results stay signed.
    pub clamp_negative_d: bool,
    pub scheme: StencilScheme,
    /// Integrate the recovered Laplacian into `phi` when set.
    pub integrate: Option<PoissonOptions>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            denominator_epsilon: 1e-6,
            clamp_negative_d: false,
            scheme: StencilScheme::FD_MIRROR,
            integrate: None,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.denominator_epsilon.is_finite() && self.denominator_epsilon >= 0.0) {
            return Err(MistError::invalid(format!(
                "denominator epsilon must be non-negative, got {}",
                self.denominator_epsilon
            )));
        }
        Ok(())
    }
}

fn check_pairs(pairs: &[SpecklePair], min: usize, geometry: &Geometry) -> Result<()> {
    if pairs.len() < min {
        return Err(MistError::invalid(format!(
            "need at least {min} speckle pairs, got {}",
            pairs.len()
        )));
    }
    let first = pairs[0].reference();
    first.ensure_solver_extent()?;
    for p in &pairs[1..] {
        first.ensure_same_shape(
            p.reference(),
            &format!("pair {:?} vs pair {:?}", pairs[0].mask_position_id(), p.mask_position_id()),
        )?;
    }
    if ((first.pitch() - geometry.pitch()) / geometry.pitch()).abs() > 1e-9 {
        return Err(MistError::DimensionMismatch(format!(
            "image pitch {} m differs from geometry pitch {} m",
            first.pitch(),
            geometry.pitch()
        )));
    }
    Ok(())
}

/// Per-pixel outcome of a small least-squares solve.
#[derive(Debug, Clone, Copy)]
struct PixelSolve<const P: usize> {
    x: [f64; P],
    /// `sqrt(det(AᵀA))`.
    volume: f64,
    /// Volume of the column-normalised system, in `[0, 1]`.
    normalized: f64,
    residual_rms: f64,
}

/// Householder QR of a column-scaled `N × P` matrix, kept for repeated
/// right-hand sides.
struct Qr<const P: usize> {
    /// Upper triangle holds `R`; below it, the reflector tails.
    a: Vec<[f64; P]>,
    /// Leading reflector entries and squared norms.
    heads: [f64; P],
    norms2: [f64; P],
}

impl<const P: usize> Qr<P> {
    fn factor(mut a: Vec<[f64; P]>) -> Self {
        let n = a.len();
        let mut heads = [0.0; P];
        let mut norms2 = [0.0; P];
        for k in 0..P {
            let s = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
            let alpha = if a[k][k] > 0.0 { -s } else { s };
            let head = a[k][k] - alpha;
            let vnorm2 = head * head + (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>();
            heads[k] = head;
            norms2[k] = vnorm2;
            if vnorm2 == 0.0 {
                continue;
            }
            for j in k + 1..P {
                let dot = head * a[k][j] + (k + 1..n).map(|i| a[i][k] * a[i][j]).sum::<f64>();
                let f = 2.0 * dot / vnorm2;
                a[k][j] -= f * head;
                for row in &mut a[k + 1..] {
                    row[j] -= f * row[k];
                }
            }
            a[k][k] = alpha;
        }
        Self { a, heads, norms2 }
    }

    fn diagonal_product(&self) -> f64 {
        (0..P).map(|k| self.a[k][k].abs()).product()
    }

    /// Least-squares solution of the factored system for `b`.
    fn solve(&self, b: &mut [f64]) -> [f64; P] {
        let n = self.a.len();
        for k in 0..P {
            if self.norms2[k] == 0.0 {
                continue;
            }
            let dot = self.heads[k] * b[k] + (k + 1..n).map(|i| self.a[i][k] * b[i]).sum::<f64>();
            let f = 2.0 * dot / self.norms2[k];
            b[k] -= f * self.heads[k];
            for (bi, row) in b[k + 1..].iter_mut().zip(&self.a[k + 1..]) {
                *bi -= f * row[k];
            }
        }
        let mut z = [0.0; P];
        for k in (0..P).rev() {
            let s: f64 = (k + 1..P).map(|j| self.a[k][j] * z[j]).sum();
            z[k] = (b[k] - s) / self.a[k][k];
        }
        z
    }
}

/// `b − a·x` accumulated in doubled precision (FMA products, two-sum).
fn compensated_residual<const P: usize>(a: &[f64; P], x: &[f64; P], b: f64) -> f64 {
    let mut sum = b;
    let mut err = 0.0;
    for j in 0..P {
        let p = -a[j] * x[j];
        let pe = (-a[j]).mul_add(x[j], -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + pe;
        sum = t;
    }
    sum + err
}

/// Least squares on the column-scaled `N × P` system by Householder QR,
/// followed by one step of iterative refinement with a compensated residual.
fn solve_pixel<const P: usize>(rows: &[[f64; P]], rhs: &[f64]) -> PixelSolve<P> {
    let n = rows.len();
    debug_assert!(n >= P);
    let mut norms = [0.0; P];
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
    }
    let singular = PixelSolve {
        x: [0.0; P],
        volume: 0.0,
        normalized: 0.0,
        residual_rms: 0.0,
    };
    if norms.contains(&0.0) {
        return singular;
    }

    let scaled: Vec<[f64; P]> = rows
        .iter()
        .map(|r| std::array::from_fn(|j| r[j] / norms[j]))
        .collect();
    let qr = Qr::factor(scaled.clone());
    let normalized = qr.diagonal_product();
    if normalized == 0.0 || !normalized.is_finite() {
        return singular;
    }
    let mut z = qr.solve(&mut rhs.to_vec());
    let mut correction: Vec<f64> = scaled
        .iter()
        .zip(rhs)
        .map(|(r, &b)| compensated_residual(r, &z, b))
        .collect();
    let dz = qr.solve(&mut correction);
    for j in 0..P {
        z[j] += dz[j];
    }
    let x: [f64; P] = std::array::from_fn(|j| z[j] / norms[j]);
    let residual_rms = residual_rms(rows, rhs, &x);
    PixelSolve {
        x,
        volume: normalized * norms.iter().product::<f64>(),
        normalized,
        residual_rms,
    }
}

fn residual_rms<const P: usize>(rows: &[[f64; P]], rhs: &[f64], x: &[f64; P]) -> f64 {
    let ss: f64 = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let e = b - (0..P).map(|j| r[j] * x[j]).sum::<f64>();
            e * e
        })
        .sum();
    (ss / rows.len() as f64).sqrt()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Flags degenerate pixels from their system volumes.
fn degenerate_mask(volume: &[f64], normalized: &[f64], epsilon: f64) -> Vec<bool> {
    let threshold = epsilon * median(volume);
    volume
        .iter()
        .zip(normalized)
        .map(|(&v, &n)| !(v > threshold && v > 0.0 && n >= RANK_FLOOR))
        .collect()
}

/// For each pixel, the index of the nearest valid pixel (itself if valid),
/// found by multi-source breadth-first search over the 4-neighbourhood.
fn nearest_valid(mask: &[bool], width: usize, height: usize) -> Result<Vec<usize>> {
    let mut source = vec![usize::MAX; mask.len()];
    let mut queue = std::collections::VecDeque::new();
    for (i, &bad) in mask.iter().enumerate() {
        if !bad {
            source[i] = i;
            queue.push_back(i);
        }
    }
    if queue.is_empty() {
        return Err(MistError::DegenerateSystem(format!(
            "all {} pixels are rank deficient (are the mask positions distinct?)",
            mask.len()
        )));
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let mut visit = |j: usize| {
            if source[j] == usize::MAX {
                source[j] = source[i];
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < width {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - width);
        }
        if y + 1 < height {
            visit(i + width);
        }
    }
    Ok(source)
}

fn fill(values: &mut [f64], source: &[usize]) {
    for i in 0..values.len() {
        let s = source[i];
        if s != i {
            values[i] = values[s];
        }
    }
}

fn field_like(like: &ScalarField, values: Vec<f64>) -> Result<ScalarField> {
    ScalarField::new(like.width(), like.height(), like.pitch(), values).map_err(|e| {
        MistError::DegenerateSystem(format!("solver produced non-finite output: {e}"))
    })
}

fn finish_scalar(
    like: &ScalarField,
    mut lap: Vec<f64>,
    mut d: Vec<f64>,
    mut residual: Vec<f64>,
    degenerate: Vec<bool>,
    opts: &SolverOptions,
) -> Result<ReconstructionResult> {
    let source = nearest_valid(&degenerate, like.width(), like.height())?;
    fill(&mut lap, &source);
    fill(&mut d, &source);
    fill(&mut residual, &source);
    let lap_phi = field_like(like, lap)?;
    let phi = match &opts.integrate {
        Some(p) => Some(integrate_phase(&lap_phi, p)?),
        None => None,
    };
    Ok(ReconstructionResult {
        lap_phi,
        d_eff: field_like(like, d)?,
        phi,
        residual_rms: field_like(like, residual)?,
        degenerate,
    })
}

/// `a·d − b·c` with one rounding error (Kahan's FMA scheme).
fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = b * c;
    let e = (-b).mul_add(c, w);
    a.mul_add(d, -w) + e
}

/// Closed-form solution for two mask positions.
///
/// `D_eff = (1/Δ)(I_S1 I_R2 − I_S2 I_R1) / (I_R2 ∇²I_R1 − I_R1 ∇²I_R2)`; the
/// phase Laplacian is back-substituted into both equations and the two
/// estimates averaged, which keeps the result symmetric in the pair order.
pub fn solve_two_shot(
    p1: &SpecklePair,
    p2: &SpecklePair,
    geometry: &Geometry,
    opts: &SolverOptions,
) -> Result<ReconstructionResult> {
    opts.validate()?;
    let pairs = [p1.clone(), p2.clone()];
    check_pairs(&pairs, 2, geometry)?;
    let (r1, s1) = (p1.reference().values(), p1.sample().values());
    let (r2, s2) = (p2.reference().values(), p2.sample().values());
    let l1 = diffops::laplacian(p1.reference(), opts.scheme)?;
    let l2 = diffops::laplacian(p2.reference(), opts.scheme)?;
    let (l1, l2) = (l1.values(), l2.values());

    let delta = geometry.delta();
    let k_over_delta = geometry.wave_number() / delta;
    let lens = geometry.lensing_coefficient();
    let n = r1.len();

    let per_pixel: Vec<(f64, f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            // S1·R2 − S2·R1 written as (R2 − S2)·R1 − (R1 − S1)·R2 so the
            // O(1) intensities cancel before rounding.
            let (b1, b2) = (r1[i] - s1[i], r2[i] - s2[i]);
            let den = det2(r2[i], r1[i], l2[i], l1[i]);
            let normalized =
                den.abs() / ((r1[i].hypot(r2[i])) * (l1[i].hypot(l2[i]))).max(f64::MIN_POSITIVE);
            let d = det2(b2, b1, r2[i], r1[i]) / (delta * den);
            let lap1 = k_over_delta * (b1 + delta * d * l1[i]) / r1[i];
            let lap2 = k_over_delta * (b2 + delta * d * l2[i]) / r2[i];
            let lap = 0.5 * (lap1 + lap2);
            let e1 = b1 - lens * r1[i] * lap + delta * d * l1[i];
            let e2 = b2 - lens * r2[i] * lap + delta * d * l2[i];
            let res = (0.5 * (e1 * e1 + e2 * e2)).sqrt();
            (den.abs(), normalized, d, lap, res)
        })
        .collect();

    let volume: Vec<f64> = per_pixel.iter().map(|p| p.0).collect();
    let normalized: Vec<f64> = per_pixel.iter().map(|p| p.1).collect();
    let degenerate = degenerate_mask(&volume, &normalized, opts.denominator_epsilon);
    let clean = |v: f64, bad: bool| if bad || !v.is_finite() { 0.0 } else { v };
    let d = per_pixel
        .iter()
        .zip(&degenerate)
        .map(|(p, &bad)| clean(p.2, bad))
        .collect();
    let lap = per_pixel
        .iter()
        .zip(&degenerate)
        .map(|(p, &bad)| clean(p.3, bad))
        .collect();
    let res = per_pixel
        .iter()
        .zip(&degenerate)
        .map(|(p, &bad)| clean(p.4, bad))
        .collect();
    finish_scalar(p1.reference(), lap, d, res, degenerate, opts)
}

/// Least-squares solution for `N ≥ 2` mask positions.
///
/// Each pixel solves the `N × 2` system with rows
/// `[(Δ/k)·I_Ri, −Δ·∇²I_Ri] · [∇²φ, D_eff]ᵀ = I_Ri − I_Si` by Householder QR
/// on equilibrated columns. For `N = 2` this is the closed-form solution.
pub fn solve_least_squares(
    pairs: &[SpecklePair],
    geometry: &Geometry,
    opts: &SolverOptions,
) -> Result<ReconstructionResult> {
    opts.validate()?;
    check_pairs(pairs, 2, geometry)?;
    let laps = pairs
        .iter()
        .map(|p| diffops::laplacian(p.reference(), opts.scheme))
        .collect::<Result<Vec<_>>>()?;
    let lens = geometry.lensing_coefficient();
    let delta = geometry.delta();
    let n = pairs[0].reference().len();

    let solves: Vec<PixelSolve<2>> = (0..n)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(pairs.len()), Vec::with_capacity(pairs.len())),
            |(rows, rhs), i| {
                rows.clear();
                rhs.clear();
                for (p, lap) in pairs.iter().zip(&laps) {
                    let r = p.reference().values()[i];
                    rows.push([lens * r, -delta * lap.values()[i]]);
                    rhs.push(r - p.sample().values()[i]);
                }
                solve_pixel(rows, rhs)
            },
        )
        .collect();

    let volume: Vec<f64> = solves.iter().map(|s| s.volume).collect();
    let normalized: Vec<f64> = solves.iter().map(|s| s.normalized).collect();
    let degenerate = degenerate_mask(&volume, &normalized, opts.denominator_epsilon);
    let pick = |f: &dyn Fn(&PixelSolve<2>) -> f64| -> Vec<f64> {
        solves
            .iter()
            .zip(&degenerate)
            .map(|(s, &bad)| if bad { 0.0 } else { f(s) })
            .collect()
    };
    let lap = pick(&|s| s.x[0]);
    let d = pick(&|s| s.x[1]);
    let res = pick(&|s| s.residual_rms);
    finish_scalar(pairs[0].reference(), lap, d, res, degenerate, opts)
}

/// Directional dark-field solve for `N ≥ 4` mask positions.
///
/// Rows are `[(Δ/k)·I_Ri, −Δ·∂²ₓI_Ri, −Δ·∂²_yI_Ri, −Δ·∂ₓ∂_yI_Ri]` for the
/// unknowns `[∇²φ, D_xx, D_yy, D_xy]`, i.e. the diffusion tensor is treated
/// as slowly varying term by term.
pub fn solve_tensor(
    pairs: &[SpecklePair],
    geometry: &Geometry,
    opts: &SolverOptions,
) -> Result<TensorResult> {
    opts.validate()?;
    check_pairs(pairs, 4, geometry)?;
    let derivs = pairs
        .iter()
        .map(|p| {
            let r = p.reference();
            Ok([
                diffops::second_derivative_x(r, opts.scheme)?,
                diffops::second_derivative_y(r, opts.scheme)?,
                diffops::mixed_derivative(r, opts.scheme)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let lens = geometry.lensing_coefficient();
    let delta = geometry.delta();
    let n = pairs[0].reference().len();

    let solves: Vec<PixelSolve<4>> = (0..n)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(pairs.len()), Vec::with_capacity(pairs.len())),
            |(rows, rhs), i| {
                rows.clear();
                rhs.clear();
                for (p, [xx, yy, xy]) in pairs.iter().zip(&derivs) {
                    let r = p.reference().values()[i];
                    rows.push([
                        lens * r,
                        -delta * xx.values()[i],
                        -delta * yy.values()[i],
                        -delta * xy.values()[i],
                    ]);
                    rhs.push(r - p.sample().values()[i]);
                }
                solve_pixel(rows, rhs)
            },
        )
        .collect();

    let volume: Vec<f64> = solves.iter().map(|s| s.volume).collect();
    let normalized: Vec<f64> = solves.iter().map(|s| s.normalized).collect();
    let degenerate = degenerate_mask(&volume, &normalized, opts.denominator_epsilon);
    let like = pairs[0].reference();
    let source = nearest_valid(&degenerate, like.width(), like.height())?;
    let component = |f: &dyn Fn(&PixelSolve<4>) -> f64| -> Result<ScalarField> {
        let mut v: Vec<f64> = solves
            .iter()
            .zip(&degenerate)
            .map(|(s, &bad)| if bad { 0.0 } else { f(s) })
            .collect();
        fill(&mut v, &source);
        field_like(like, v)
    };
    Ok(TensorResult {
        lap_phi: component(&|s| s.x[0])?,
        d_xx: component(&|s| s.x[1])?,
        d_yy: component(&|s| s.x[2])?,
        d_xy: component(&|s| s.x[3])?,
        residual_rms: component(&|s| s.residual_rms)?,
        degenerate,
    })
}

/// Relative size of the speckle-transport term the simplified model drops:
/// `mean(∇I_R·∇φ) / mean(|∇I_R|·|∇φ|)`, in `[−1, 1]`. Zero when `φ` is flat.
pub fn validate_decorrelation(
    i_r: &ScalarField,
    phi: &ScalarField,
    scheme: StencilScheme,
) -> Result<f64> {
    i_r.ensure_same_shape(phi, "decorrelation inputs")?;
    let (ix, iy) = diffops::gradient(i_r, scheme)?;
    let (px, py) = diffops::gradient(phi, scheme)?;
    let mut dot = 0.0;
    let mut mag = 0.0;
    for n in 0..i_r.len() {
        let (a, b) = (ix.values()[n], iy.values()[n]);
        let (c, d) = (px.values()[n], py.values()[n]);
        dot += a * c + b * d;
        mag += a.hypot(b) * c.hypot(d);
    }
    Ok(if mag == 0.0 { 0.0 } else { dot / mag })
}
