//! Image-quality figures: contrast-to-noise ratio and relative RMS error.

use std::fmt;
use std::str::FromStr;

use crate::error::{MistError, Result};
use crate::field::ScalarField;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width * height < 4 {
            return Err(MistError::DegenerateRoi(format!(
                "ROI {width}x{height} covers fewer than 4 pixels"
            )));
        }
        Ok(Self {
            x0,
            y0,
            width,
            height,
        })
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn fits(&self, field: &ScalarField) -> bool {
        self.x0 + self.width <= field.width() && self.y0 + self.height <= field.height()
    }

    pub fn overlaps(&self, other: &Roi) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }

    fn values<'a>(&'a self, field: &'a ScalarField) -> impl Iterator<Item = f64> + 'a {
        (self.y0..self.y0 + self.height)
            .flat_map(move |y| (self.x0..self.x0 + self.width).map(move |x| field.get(x, y)))
    }

    fn check(&self, field: &ScalarField, name: &str) -> Result<()> {
        if self.fits(field) {
            Ok(())
        } else {
            Err(MistError::DegenerateRoi(format!(
                "{name} ROI {self} exceeds the {}x{} field",
                field.width(),
                field.height()
            )))
        }
    }
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.width, self.height)
    }
}

/// Parses `x0,y0,w,h`.
impl FromStr for Roi {
    type Err = MistError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(MistError::invalid(format!(
                "ROI {s:?} must be given as x0,y0,width,height"
            )));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| MistError::invalid(format!("ROI component {p:?} is not a pixel count")))?;
        }
        Roi::new(v[0], v[1], v[2], v[3])
    }
}

/// CNR together with the statistics it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnrReport {
    pub cnr: f64,
    pub mean_background: f64,
    /// Population (1/N) standard deviation over the background ROI.
    pub std_background: f64,
    pub mean_feature: f64,
}

/// Contrast-to-noise ratio `(μ₁ − μ₂)/σ₁`, with `μ₁, σ₁` taken over the
/// homogeneous background ROI and `μ₂` over the feature ROI. The sign is
/// kept: a feature brighter than the background gives a negative value.
pub fn cnr(field: &ScalarField, background: &Roi, feature: &Roi) -> Result<CnrReport> {
    background.check(field, "background")?;
    feature.check(field, "feature")?;
    if background.overlaps(feature) {
        return Err(MistError::DegenerateRoi(format!(
            "background ROI {background} and feature ROI {feature} overlap"
        )));
    }
    let n1 = background.area() as f64;
    let mu1 = background.values(field).sum::<f64>() / n1;
    let sigma1 = (background.values(field).map(|v| (v - mu1).powi(2)).sum::<f64>() / n1).sqrt();
    let mu2 = feature.values(field).sum::<f64>() / feature.area() as f64;
    if sigma1 == 0.0 {
        return Err(MistError::DegenerateRoi(
            "background ROI has zero variance".into(),
        ));
    }
    Ok(CnrReport {
        cnr: (mu1 - mu2) / sigma1,
        mean_background: mu1,
        std_background: sigma1,
        mean_feature: mu2,
    })
}

fn interior_pairs<'a>(
    estimate: &'a ScalarField,
    truth: &'a ScalarField,
    border: usize,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (w, h) = (truth.width(), truth.height());
    (border..h.saturating_sub(border)).flat_map(move |y| {
        (border..w.saturating_sub(border)).map(move |x| (estimate.get(x, y), truth.get(x, y)))
    })
}

/// `RMS(estimate − truth) / RMS(truth)` over the interior left after
/// excluding `border_exclude` pixels on every side.
pub fn rms_relative_error(
    estimate: &ScalarField,
    truth: &ScalarField,
    border_exclude: usize,
) -> Result<f64> {
    estimate.ensure_same_shape(truth, "rms_relative_error")?;
    if 2 * border_exclude >= truth.width() || 2 * border_exclude >= truth.height() {
        return Err(MistError::invalid(format!(
            "border of {border_exclude} pixels leaves no interior in a {}x{} field",
            truth.width(),
            truth.height()
        )));
    }
    relative(interior_pairs(estimate, truth, border_exclude))
}

/// Same as [`rms_relative_error`] restricted to pixels where `select` is true.
pub fn rms_relative_error_where(
    estimate: &ScalarField,
    truth: &ScalarField,
    select: &[bool],
) -> Result<f64> {
    estimate.ensure_same_shape(truth, "rms_relative_error_where")?;
    if select.len() != truth.len() {
        return Err(MistError::DimensionMismatch(format!(
            "selection has {} entries for {} pixels",
            select.len(),
            truth.len()
        )));
    }
    relative(
        estimate
            .values()
            .iter()
            .zip(truth.values())
            .zip(select)
            .filter(|(_, &s)| s)
            .map(|((&e, &t), _)| (e, t)),
    )
}

fn relative(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let (mut err, mut norm) = (0.0, 0.0);
    for (e, t) in pairs {
        err += (e - t) * (e - t);
        norm += t * t;
    }
    if norm == 0.0 {
        return Err(MistError::DegenerateRoi(
            "reference field is identically zero over the evaluation region".into(),
        ));
    }
    Ok((err / norm).sqrt())
}
