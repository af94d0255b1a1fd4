//! Measurement pairs and reconstruction outputs.

use crate::error::{MistError, Result};
use crate::field::ScalarField;

/// Reference and sample images recorded at one mask position.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecklePair {
    reference: ScalarField,
    sample: ScalarField,
    mask_position_id: String,
}

impl SpecklePair {
    /// The reference must be strictly positive: it multiplies and divides
    /// throughout the inversion.
    pub fn new(
        reference: ScalarField,
        sample: ScalarField,
        mask_position_id: impl Into<String>,
    ) -> Result<Self> {
        let id = mask_position_id.into();
        reference.ensure_same_shape(&sample, &format!("pair {id:?} reference vs sample"))?;
        if let Some(i) = reference.values().iter().position(|&v| v <= 0.0) {
            return Err(MistError::invalid(format!(
                "pair {id:?}: reference intensity {} at pixel ({}, {}) is not positive",
                reference.values()[i],
                i % reference.width(),
                i / reference.width()
            )));
        }
        Ok(Self {
            reference,
            sample,
            mask_position_id: id,
        })
    }

    pub fn reference(&self) -> &ScalarField {
        &self.reference
    }

    pub fn sample(&self) -> &ScalarField {
        &self.sample
    }

    pub fn mask_position_id(&self) -> &str {
        &self.mask_position_id
    }

    /// Same pair with every intensity multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.reference.scaled(factor),
            self.sample.scaled(factor),
            self.mask_position_id.clone(),
        )
    }
}

/// Output of the scalar (isotropic) solvers.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Laplacian of the phase, rad·m⁻².
    pub lap_phi: ScalarField,
    /// Effective diffusion coefficient, meters. Signed: negative values are
    /// kept so downstream statistics stay unbiased.
    pub d_eff: ScalarField,
    /// Integrated phase in radians with zero mean, when requested.
    pub phi: Option<ScalarField>,
    /// Per-pixel RMS of the model residual across the N equations.
    pub residual_rms: ScalarField,
    /// `true` where the per-pixel system was rank deficient and the value
    /// was copied from the nearest solved pixel.
    pub degenerate: Vec<bool>,
}

impl ReconstructionResult {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// Output of the directional (tensor) solver.
#[derive(Debug, Clone)]
pub struct TensorResult {
    pub lap_phi: ScalarField,
    pub d_xx: ScalarField,
    pub d_yy: ScalarField,
    /// Single off-diagonal component; the tensor is symmetric.
    pub d_xy: ScalarField,
    pub residual_rms: ScalarField,
    pub degenerate: Vec<bool>,
}

impl TensorResult {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}
