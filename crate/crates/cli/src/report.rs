//! Plain `key = value` reports.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use mist_core::{MistError, ScalarField};

#[derive(Default)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn put(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    /// Shortest exponent form that parses back to the same `f64`.
    pub fn num(&mut self, key: &str, value: f64) {
        self.put(key, format!("{value:e}"));
    }

    pub fn stats(&mut self, prefix: &str, field: &ScalarField) {
        self.num(&format!("{prefix}_mean"), field.mean());
        self.num(&format!("{prefix}_std"), field.std_dev());
        self.num(&format!("{prefix}_min"), field.min());
        self.num(&format!("{prefix}_max"), field.max());
    }

    pub fn write(&self, path: &Path) -> Result<(), MistError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| MistError::io(path, e))
    }
}

/// `value` rounded to `digits` significant digits; scientific notation
/// outside `[1e-3, 1e4)`.
pub fn significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{:.*}", digits - 1, value);
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-3..4).contains(&magnitude) {
        return format!("{:.*e}", digits - 1, value);
    }
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let text = format!("{value:.decimals$}");
    // Rounding can carry into a new leading digit (9.9995 -> 10.000).
    let rounded: f64 = text.parse().unwrap_or(value);
    if rounded.abs().log10().floor() as i32 > magnitude && decimals > 0 {
        format!("{:.*}", decimals - 1, value)
    } else {
        text
    }
}
