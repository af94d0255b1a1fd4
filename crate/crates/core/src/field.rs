//! Two-dimensional real fields on a uniform grid.
//!
//! Every image in the pipeline (reference and sample intensities, phase,
//! phase Laplacian, diffusion maps) is a [`ScalarField`]. Values are stored
//! row-major with `x` running fastest. Intensities are relative units; any
//! flat-field normalisation has to happen before they get here.

use crate::error::{MistError, Result};

/// Smallest width/height accepted by the solvers.
pub const MIN_SOLVER_EXTENT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    pitch: f64,
    values: Vec<f64>,
}

impl ScalarField {
    /// Builds a field, rejecting non-finite samples, a non-positive pitch
    /// and a value count that does not match `width * height`.
    pub fn new(width: usize, height: usize, pitch: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MistError::invalid(format!(
                "field dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(MistError::invalid(format!(
                "pixel pitch must be positive and finite, got {pitch}"
            )));
        }
        if values.len() != width * height {
            return Err(MistError::DimensionMismatch(format!(
                "{width}x{height} field needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MistError::invalid(format!(
                "non-finite value {} at pixel ({}, {})",
                values[i],
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            pitch,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, pitch: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pitch, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize, pitch: f64) -> Result<Self> {
        Self::filled(width, height, pitch, 0.0)
    }

    /// Samples `f(x, y)` at every pixel, with `x` and `y` given in meters
    /// (pixel index times pitch).
    pub fn from_fn<F>(width: usize, height: usize, pitch: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i as f64 * pitch, j as f64 * pitch));
            }
        }
        Self::new(width, height, pitch, values)
    }

    /// Internal constructor for results of arithmetic on valid fields.
    pub(crate) fn from_parts(width: usize, height: usize, pitch: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            pitch,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    /// Same field with a different pitch.
    pub fn with_pitch(mut self, pitch: f64) -> Result<Self> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(MistError::invalid(format!(
                "pixel pitch must be positive and finite, got {pitch}"
            )));
        }
        self.pitch = pitch;
        Ok(self)
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height && self.pitch == other.pitch
    }

    pub fn ensure_same_shape(&self, other: &ScalarField, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(MistError::DimensionMismatch(format!(
                "{what}: {}x{} @ {} m vs {}x{} @ {} m",
                self.width, self.height, self.pitch, other.width, other.height, other.pitch
            )))
        }
    }

    /// Fails unless the field is large enough for the solvers' stencils.
    pub fn ensure_solver_extent(&self) -> Result<()> {
        if self.width < MIN_SOLVER_EXTENT || self.height < MIN_SOLVER_EXTENT {
            return Err(MistError::invalid(format!(
                "fields entering a solver must be at least {MIN_SOLVER_EXTENT}x{MIN_SOLVER_EXTENT}, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField::from_parts(
            self.width,
            self.height,
            self.pitch,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pointwise combination of two fields of identical shape.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> ScalarField {
        assert!(self.same_shape(other), "zip_map on fields of different shape");
        ScalarField::from_parts(
            self.width,
            self.height,
            self.pitch,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64)
            .sqrt()
    }

    /// Copy with negative values replaced by zero (display only).
    pub fn clamped_non_negative(&self) -> ScalarField {
        self.map(|v| v.max(0.0))
    }
}
