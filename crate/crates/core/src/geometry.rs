//! Physical constants of an acquisition.

use std::f64::consts::PI;

use crate::error::{MistError, Result};

/// Planck constant times speed of light, in eV·m (exact SI value).
pub const HC_EV_M: f64 = 1.239_841_984e-6;

/// Wave number `2π/λ` in rad/m for a photon energy in eV, with `λ = hc/E`.
pub fn wave_number_from_energy(energy_ev: f64) -> Result<f64> {
    if !(energy_ev.is_finite() && energy_ev > 0.0) {
        return Err(MistError::invalid(format!(
            "photon energy must be positive, got {energy_ev} eV"
        )));
    }
    Ok(2.0 * PI * energy_ev / HC_EV_M)
}

/// Sample-to-detector distance, photon energy and detector pitch.
///
/// Everything is SI except the energy, which is accepted in eV because that
/// is how beamlines report it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    delta: f64,
    energy: f64,
    wave_number: f64,
    pitch: f64,
}

impl Geometry {
    pub fn new(delta_m: f64, energy_ev: f64, pitch_m: f64) -> Result<Self> {
        if !(delta_m.is_finite() && delta_m > 0.0) {
            return Err(MistError::invalid(format!(
                "propagation distance must be positive, got {delta_m} m"
            )));
        }
        if !(pitch_m.is_finite() && pitch_m > 0.0) {
            return Err(MistError::invalid(format!(
                "pixel pitch must be positive, got {pitch_m} m"
            )));
        }
        let wave_number = wave_number_from_energy(energy_ev)?;
        Ok(Self {
            delta: delta_m,
            energy: energy_ev,
            wave_number,
            pitch: pitch_m,
        })
    }

    /// Propagation distance in meters.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Photon energy in eV.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Wave number in rad/m.
    pub fn wave_number(&self) -> f64 {
        self.wave_number
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Coefficient `Δ/k` of the phase (lensing) term.
    pub fn lensing_coefficient(&self) -> f64 {
        self.delta / self.wave_number
    }
}
